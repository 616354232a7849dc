#include "jointpiv/motion_grid.hpp"

#include <algorithm>
#include <cmath>

#include "jointpiv/error.hpp"

namespace jointpiv {

namespace {

void check_dims(const GridDims& dims) {
  require(dims.nx >= 2 && dims.ny >= 2 && dims.nz >= 2, ErrorCode::invalid_argument,
          "motion grid needs at least 2 vertices per axis");
}

// Corner c of a voxel: bit 0 -> +x, bit 1 -> +y, bit 2 -> +z.
constexpr std::array<int, 3> corner_offset(int c) { return {c & 1, (c >> 1) & 1, (c >> 2) & 1}; }

std::array<std::size_t, 8> voxel_corners(const GridDims& d, int i, int j, int k) {
  std::array<std::size_t, 8> out{};
  for (int c = 0; c < 8; ++c) {
    const auto o = corner_offset(c);
    out[c] = d.vertex_index(i + o[0], j + o[1], k + o[2]);
  }
  return out;
}

using ElementMatrix = std::array<std::array<double, 8>, 8>;

// Q1 stiffness matrix of the unit cube: Kx(x)M(x)M + M(x)Kx(x)M + M(x)M(x)Kx
// with the 1D stiffness [1 -1; -1 1] and mass [1/3 1/6; 1/6 1/3].
ElementMatrix make_stiffness() {
  auto k1 = [](int s, int t) { return s == t ? 1.0 : -1.0; };
  auto m1 = [](int s, int t) { return s == t ? 1.0 / 3.0 : 1.0 / 6.0; };
  ElementMatrix k{};
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      const auto oa = corner_offset(a);
      const auto ob = corner_offset(b);
      k[a][b] = k1(oa[0], ob[0]) * m1(oa[1], ob[1]) * m1(oa[2], ob[2]) +
                m1(oa[0], ob[0]) * k1(oa[1], ob[1]) * m1(oa[2], ob[2]) +
                m1(oa[0], ob[0]) * m1(oa[1], ob[1]) * k1(oa[2], ob[2]);
    }
  }
  return k;
}

const ElementMatrix& stiffness() {
  static const ElementMatrix k = make_stiffness();
  return k;
}

struct CellCoords {
  std::array<int, 3> cell;
  std::array<double, 3> t;
  std::array<bool, 3> clamped;
};

CellCoords locate(const MotionGrid& grid, const Vec3& x, bool clamp) {
  const GridDims& d = grid.dims();
  const std::array<int, 3> n{d.nx, d.ny, d.nz};
  CellCoords out{};
  for (int a = 0; a < 3; ++a) {
    double g = x[a] / grid.spacing();
    const double upper = static_cast<double>(n[a] - 1);
    out.clamped[a] = false;
    if (clamp) {
      if (g < 0.0) {
        g = 0.0;
        out.clamped[a] = true;
      } else if (g > upper) {
        g = upper;
        out.clamped[a] = true;
      }
    }
    int c = static_cast<int>(std::floor(g));
    c = std::clamp(c, 0, n[a] - 2);
    out.cell[a] = c;
    out.t[a] = g - c;
  }
  return out;
}

Vec3 interpolate(const MotionGrid& grid, const CellCoords& cc) {
  const auto corners = voxel_corners(grid.dims(), cc.cell[0], cc.cell[1], cc.cell[2]);
  const auto coeffs = grid.coeffs();
  Vec3 u = Vec3::Zero();
  for (int c = 0; c < 8; ++c) {
    const auto o = corner_offset(c);
    double w = 1.0;
    for (int a = 0; a < 3; ++a) w *= o[a] ? cc.t[a] : 1.0 - cc.t[a];
    const double* v = &coeffs[3 * corners[c]];
    u += w * Vec3(v[0], v[1], v[2]);
  }
  return u;
}

}  // namespace

MotionGrid::MotionGrid(GridDims dims, double spacing)
    : MotionGrid(dims, spacing, std::vector<double>(3 * dims.vertex_count(), 0.0)) {}

MotionGrid::MotionGrid(GridDims dims, double spacing, std::vector<double> coeffs)
    : dims_(dims), spacing_(spacing), coeffs_(std::move(coeffs)) {
  check_dims(dims_);
  require(spacing_ > 0.0 && std::isfinite(spacing_), ErrorCode::invalid_argument,
          "motion grid spacing must be positive");
  require(coeffs_.size() == 3 * dims_.vertex_count(), ErrorCode::dimension_mismatch,
          "motion grid coefficient count does not match 3*N*M*L");
}

MotionGrid MotionGrid::covering(const Box& volume, double spacing) {
  const Vec3 size = volume.hi.cwiseMax(Vec3::Zero());
  auto count = [&](double extent) {
    return std::max(2, static_cast<int>(std::ceil(extent / spacing - 1e-9)) + 1);
  };
  return MotionGrid({count(size.x()), count(size.y()), count(size.z())}, spacing);
}

Vec3 MotionGrid::at(int i, int j, int k) const {
  const double* v = &coeffs_[3 * dims_.vertex_index(i, j, k)];
  return {v[0], v[1], v[2]};
}

void MotionGrid::set(int i, int j, int k, const Vec3& u) {
  double* v = &coeffs_[3 * dims_.vertex_index(i, j, k)];
  v[0] = u.x();
  v[1] = u.y();
  v[2] = u.z();
}

double basis_eval(const std::array<int, 3>& vertex, const Vec3& x) {
  double b = 1.0;
  for (int l = 0; l < 3; ++l) b *= std::max(0.0, 1.0 - std::abs(x[l] - vertex[l]));
  return b;
}

TrilinearStencil stencil(const MotionGrid& grid, const Vec3& x) {
  const CellCoords cc = locate(grid, x, true);
  const auto corners = voxel_corners(grid.dims(), cc.cell[0], cc.cell[1], cc.cell[2]);
  const double inv_h = 1.0 / grid.spacing();
  TrilinearStencil s{};
  for (int c = 0; c < 8; ++c) {
    const auto o = corner_offset(c);
    std::array<double, 3> f{};
    std::array<double, 3> df{};
    for (int a = 0; a < 3; ++a) {
      f[a] = o[a] ? cc.t[a] : 1.0 - cc.t[a];
      df[a] = cc.clamped[a] ? 0.0 : (o[a] ? inv_h : -inv_h);
    }
    s.vertex[c] = corners[c];
    s.weight[c] = f[0] * f[1] * f[2];
    s.weight_gradient[c] = {df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]};
  }
  return s;
}

Vec3 eval(const MotionGrid& grid, const Vec3& x) { return interpolate(grid, locate(grid, x, true)); }

Vec3 eval_extrapolated(const MotionGrid& grid, const Vec3& x) {
  return interpolate(grid, locate(grid, x, false));
}

Eigen::Matrix3d eval_jacobian(const MotionGrid& grid, const Vec3& x) {
  const TrilinearStencil s = stencil(grid, x);
  const auto coeffs = grid.coeffs();
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  for (int c = 0; c < 8; ++c) {
    const double* v = &coeffs[3 * s.vertex[c]];
    j += Vec3(v[0], v[1], v[2]) * s.weight_gradient[c].transpose();
  }
  return j;
}

double voxel_divergence(const MotionGrid& grid, const std::array<int, 3>& voxel) {
  const auto corners = voxel_corners(grid.dims(), voxel[0], voxel[1], voxel[2]);
  const auto coeffs = grid.coeffs();
  double sum = 0.0;
  for (int c = 0; c < 8; ++c) {
    const auto o = corner_offset(c);
    for (int l = 0; l < 3; ++l) sum += (o[l] ? 1.0 : -1.0) * coeffs[3 * corners[c] + l];
  }
  return 0.25 * sum;
}

DivergenceOperator::DivergenceOperator(GridDims dims) : dims_(dims) { check_dims(dims_); }

void DivergenceOperator::apply(std::span<const double> u, std::span<double> out) const {
  require(u.size() == cols() && out.size() == rows(), ErrorCode::dimension_mismatch,
          "divergence operator: vector length mismatch");
  const GridDims& d = dims_;
  const std::size_t sx = 3;
  const std::size_t sy = 3 * static_cast<std::size_t>(d.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(d.ny);
  std::size_t v = 0;
  for (int k = 0; k + 1 < d.nz; ++k) {
    for (int j = 0; j + 1 < d.ny; ++j) {
      const double* base = u.data() + 3 * d.vertex_index(0, j, k);
      for (int i = 0; i + 1 < d.nx; ++i, ++v, base += 3) {
        const double* c0 = base;
        const double* c1 = base + sx;
        const double* c2 = base + sy;
        const double* c3 = base + sy + sx;
        const double* c4 = base + sz;
        const double* c5 = base + sz + sx;
        const double* c6 = base + sz + sy;
        const double* c7 = base + sz + sy + sx;
        const double dx = (c1[0] + c3[0] + c5[0] + c7[0]) - (c0[0] + c2[0] + c4[0] + c6[0]);
        const double dy = (c2[1] + c3[1] + c6[1] + c7[1]) - (c0[1] + c1[1] + c4[1] + c5[1]);
        const double dz = (c4[2] + c5[2] + c6[2] + c7[2]) - (c0[2] + c1[2] + c2[2] + c3[2]);
        out[v] = 0.25 * (dx + dy + dz);
      }
    }
  }
}

void DivergenceOperator::apply_transpose(std::span<const double> phi,
                                         std::span<double> out) const {
  require(phi.size() == rows() && out.size() == cols(), ErrorCode::dimension_mismatch,
          "divergence operator: vector length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const GridDims& d = dims_;
  const std::size_t sx = 3;
  const std::size_t sy = 3 * static_cast<std::size_t>(d.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(d.ny);
  std::size_t v = 0;
  for (int k = 0; k + 1 < d.nz; ++k) {
    for (int j = 0; j + 1 < d.ny; ++j) {
      double* base = out.data() + 3 * d.vertex_index(0, j, k);
      for (int i = 0; i + 1 < d.nx; ++i, ++v, base += 3) {
        const double q = 0.25 * phi[v];
        double* c0 = base;
        double* c1 = base + sx;
        double* c2 = base + sy;
        double* c3 = base + sy + sx;
        double* c4 = base + sz;
        double* c5 = base + sz + sx;
        double* c6 = base + sz + sy;
        double* c7 = base + sz + sy + sx;
        c0[0] -= q; c2[0] -= q; c4[0] -= q; c6[0] -= q;
        c1[0] += q; c3[0] += q; c5[0] += q; c7[0] += q;
        c0[1] -= q; c1[1] -= q; c4[1] -= q; c5[1] -= q;
        c2[1] += q; c3[1] += q; c6[1] += q; c7[1] += q;
        c0[2] -= q; c1[2] -= q; c2[2] -= q; c3[2] -= q;
        c4[2] += q; c5[2] += q; c6[2] += q; c7[2] += q;
      }
    }
  }
}

std::vector<double> DivergenceOperator::apply(std::span<const double> u) const {
  std::vector<double> out(rows());
  apply(u, out);
  return out;
}

std::vector<double> DivergenceOperator::apply_transpose(std::span<const double> phi) const {
  std::vector<double> out(cols());
  apply_transpose(phi, out);
  return out;
}

QuadraticValue gradient_energy(const MotionGrid& grid) {
  const GridDims& d = grid.dims();
  const auto coeffs = grid.coeffs();
  const ElementMatrix& k = stiffness();
  QuadraticValue out;
  out.gradient.assign(coeffs.size(), 0.0);
  for (int vk = 0; vk + 1 < d.nz; ++vk) {
    for (int vj = 0; vj + 1 < d.ny; ++vj) {
      for (int vi = 0; vi + 1 < d.nx; ++vi) {
        const auto corners = voxel_corners(d, vi, vj, vk);
        for (int l = 0; l < 3; ++l) {
          std::array<double, 8> f{};
          for (int c = 0; c < 8; ++c) f[c] = coeffs[3 * corners[c] + l];
          for (int a = 0; a < 8; ++a) {
            double kf = 0.0;
            for (int b = 0; b < 8; ++b) kf += k[a][b] * f[b];
            out.value += f[a] * kf;
            out.gradient[3 * corners[a] + l] += 2.0 * kf;
          }
        }
      }
    }
  }
  return out;
}

MotionGrid prolongate(const MotionGrid& grid, GridDims new_dims, double new_spacing) {
  MotionGrid out(new_dims, new_spacing);
  for (int k = 0; k < new_dims.nz; ++k) {
    for (int j = 0; j < new_dims.ny; ++j) {
      for (int i = 0; i < new_dims.nx; ++i) {
        out.set(i, j, k, eval(grid, out.position(i, j, k)));
      }
    }
  }
  return out;
}

MotionGrid restrict_to(const MotionGrid& grid, GridDims new_dims, double new_spacing) {
  static constexpr std::array<double, 3> w{0.25, 0.5, 0.25};
  MotionGrid out(new_dims, new_spacing);
  const double half = 0.5 * new_spacing;
  for (int k = 0; k < new_dims.nz; ++k) {
    for (int j = 0; j < new_dims.ny; ++j) {
      for (int i = 0; i < new_dims.nx; ++i) {
        const Vec3 x0 = out.position(i, j, k);
        Vec3 acc = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
          for (int b = 0; b < 3; ++b) {
            for (int a = 0; a < 3; ++a) {
              const Vec3 x = x0 + half * Vec3(a - 1, b - 1, c - 1);
              acc += w[a] * w[b] * w[c] * eval_extrapolated(grid, x);
            }
          }
        }
        out.set(i, j, k, acc);
      }
    }
  }
  return out;
}

}  // namespace jointpiv
