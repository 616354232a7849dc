#include "jointpiv/camera.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "jointpiv/error.hpp"

namespace jointpiv {

namespace {

// Exponents of x, y, z for each monomial, in PolynomialCamera order.
constexpr int kMonomialPowers[PolynomialCamera::kTerms][3] = {
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0}, {1, 1, 0}, {0, 2, 0},
    {1, 0, 1}, {0, 1, 1}, {0, 0, 2}, {3, 0, 0}, {2, 1, 0}, {1, 2, 0}, {0, 3, 0},
    {2, 0, 1}, {1, 1, 1}, {0, 2, 1}, {1, 0, 2}, {0, 1, 2}};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Parametric clip of the segment a + t (b - a), t in [0, 1], against the box.
bool clip_segment(const Box& box, Vec3& a, Vec3& b) {
  const Vec3 d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = box.lo[axis] - a[axis];
    const double hi = box.hi[axis] - a[axis];
    if (std::abs(d[axis]) < 1e-300) {
      if (lo > 0.0 || hi < 0.0) return false;
      continue;
    }
    double ta = lo / d[axis];
    double tb = hi / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  const Vec3 start = a;
  a = box.clamp(start + t0 * d);
  b = box.clamp(start + t1 * d);
  return true;
}

}  // namespace

PinholeCamera::PinholeCamera(const Mat34& matrix) : matrix_(matrix) {
  require(matrix_.row(2).norm() > 0.0, ErrorCode::invalid_argument,
          "pinhole camera: bottom row of the projection matrix is zero");
}

double PinholeCamera::depth(const Vec3& p) const {
  const double w = matrix_.row(2).head<3>().dot(p) + matrix_(2, 3);
  if (w == 0.0 || !std::isfinite(w)) {
    raise(ErrorCode::degenerate_projection, "pinhole camera: point lies on the principal plane");
  }
  return w;
}

Vec2 PinholeCamera::project(const Vec3& p) const {
  const double w = depth(p);
  const Eigen::Vector3d h = matrix_.leftCols<3>() * p + matrix_.col(3);
  return {h[0] / w, h[1] / w};
}

Mat23 PinholeCamera::jacobian(const Vec3& p) const {
  const double w = depth(p);
  const Eigen::Vector3d h = matrix_.leftCols<3>() * p + matrix_.col(3);
  const double u = h[0] / w;
  const double v = h[1] / w;
  Mat23 j;
  j.row(0) = (matrix_.row(0).head<3>() - u * matrix_.row(2).head<3>()) / w;
  j.row(1) = (matrix_.row(1).head<3>() - v * matrix_.row(2).head<3>()) / w;
  return j;
}

PolynomialCamera::PolynomialCamera(const Coefficients& coefficients)
    : coefficients_(coefficients) {
  for (const Vec2& a : coefficients_) {
    require(a.allFinite(), ErrorCode::invalid_argument,
            "polynomial camera: coefficients must be finite");
  }
}

std::array<double, PolynomialCamera::kTerms> PolynomialCamera::monomials(const Vec3& p) {
  const double x = p.x(), y = p.y(), z = p.z();
  return {1.0,       x,         y,         z,         x * x,     x * y,    y * y,
          x * z,     y * z,     z * z,     x * x * x, x * x * y, x * y * y, y * y * y,
          x * x * z, x * y * z, y * y * z, x * z * z, y * z * z};
}

Eigen::Matrix<double, PolynomialCamera::kTerms, 3> PolynomialCamera::monomial_gradients(
    const Vec3& p) {
  const double x = p.x(), y = p.y(), z = p.z();
  Eigen::Matrix<double, kTerms, 3> g;
  // clang-format off
  g <<  0,         0,         0,
        1,         0,         0,
        0,         1,         0,
        0,         0,         1,
        2 * x,     0,         0,
        y,         x,         0,
        0,         2 * y,     0,
        z,         0,         x,
        0,         z,         y,
        0,         0,         2 * z,
        3 * x * x, 0,         0,
        2 * x * y, x * x,     0,
        y * y,     2 * x * y, 0,
        0,         3 * y * y, 0,
        2 * x * z, 0,         x * x,
        y * z,     x * z,     x * y,
        0,         2 * y * z, y * y,
        z * z,     0,         2 * x * z,
        0,         z * z,     2 * y * z;
  // clang-format on
  return g;
}

Vec2 PolynomialCamera::project(const Vec3& p) const {
  const auto m = monomials(p);
  Vec2 out = Vec2::Zero();
  for (int i = 0; i < kTerms; ++i) out += m[i] * coefficients_[i];
  return out;
}

Mat23 PolynomialCamera::jacobian(const Vec3& p) const {
  const auto g = monomial_gradients(p);
  Mat23 j = Mat23::Zero();
  for (int i = 0; i < kTerms; ++i) j += coefficients_[i] * g.row(i);
  return j;
}

Vec2 project(const Camera& camera, const Vec3& p) {
  return std::visit([&](const auto& cam) { return cam.project(p); }, camera);
}

Mat23 project_jacobian(const Camera& camera, const Vec3& p) {
  return std::visit([&](const auto& cam) { return cam.jacobian(p); }, camera);
}

Vec2 back_project(const Camera& camera, const Vec2& pixel, double z, const Vec2& initial_xy) {
  return std::visit(
      overloaded{
          [&](const PinholeCamera& cam) -> Vec2 {
            // Rows (P1 - u P3) and (P2 - v P3) of the homogeneous system,
            // restricted to the unknowns x and y.
            const Mat34& m = cam.matrix();
            Eigen::Matrix2d a;
            Eigen::Vector2d b;
            for (int r = 0; r < 2; ++r) {
              const Eigen::RowVector4d row = m.row(r) - pixel[r] * m.row(2);
              a(r, 0) = row[0];
              a(r, 1) = row[1];
              b[r] = -(row[2] * z + row[3]);
            }
            const double det = a.determinant();
            if (std::abs(det) < 1e-14 * a.cwiseAbs().maxCoeff() * a.cwiseAbs().maxCoeff()) {
              raise(ErrorCode::back_projection_failure,
                    "pinhole back-projection: line of sight is parallel to the depth plane");
            }
            return a.inverse() * b;
          },
          [&](const PolynomialCamera& cam) -> Vec2 {
            Vec2 xy = initial_xy;
            Vec2 f = cam.project({xy.x(), xy.y(), z}) - pixel;
            for (int it = 0; it < 50; ++it) {
              if (f.norm() < 1e-10) return xy;
              const Eigen::Matrix2d j = cam.jacobian({xy.x(), xy.y(), z}).leftCols<2>();
              const Eigen::FullPivLU<Eigen::Matrix2d> lu(j);
              if (!lu.isInvertible()) break;
              const Vec2 step = lu.solve(f);
              double scale = 1.0;
              bool improved = false;
              for (int halving = 0; halving < 30; ++halving) {
                const Vec2 trial = xy - scale * step;
                const Vec2 ft = cam.project({trial.x(), trial.y(), z}) - pixel;
                if (ft.norm() < f.norm()) {
                  xy = trial;
                  f = ft;
                  improved = true;
                  break;
                }
                scale *= 0.5;
              }
              if (!improved) break;
            }
            if (f.norm() < 1e-8) return xy;
            raise(ErrorCode::back_projection_failure,
                  "polynomial back-projection: Newton iteration did not converge");
          }},
      camera);
}

Ray ray_through(const Camera& camera, const Vec2& pixel, const Box& volume) {
  const Vec2 start = volume.center().head<2>();
  Vec3 a;
  Vec3 b;
  try {
    const Vec2 near_xy = back_project(camera, pixel, volume.lo.z(), start);
    const Vec2 far_xy = back_project(camera, pixel, volume.hi.z(), start);
    a = {near_xy.x(), near_xy.y(), volume.lo.z()};
    b = {far_xy.x(), far_xy.y(), volume.hi.z()};
  } catch (const Error& e) {
    raise(ErrorCode::empty_ray, std::string("ray through pixel: ") + e.what());
  }
  if (!clip_segment(volume, a, b)) {
    raise(ErrorCode::empty_ray, "ray through pixel does not intersect the volume");
  }
  return {a, b};
}

PolynomialCamera fit_polynomial(std::span<const Correspondence> correspondences) {
  constexpr int n_terms = PolynomialCamera::kTerms;
  const auto n = static_cast<Eigen::Index>(correspondences.size());
  require(n >= n_terms, ErrorCode::underdetermined_fit,
          "polynomial fit needs at least 19 correspondences, got " + std::to_string(n));

  // Raw voxel monomials are nearly collinear (x and x^2 over [0, 200]), so
  // the fit runs in centred coordinates scaled to [-1, 1] and is expanded
  // back to the monomial basis afterwards.
  Vec3 lo = correspondences[0].point;
  Vec3 hi = lo;
  for (const Correspondence& c : correspondences) {
    lo = lo.cwiseMin(c.point);
    hi = hi.cwiseMax(c.point);
  }
  const Vec3 centre = 0.5 * (lo + hi);
  Vec3 half = 0.5 * (hi - lo);
  for (int i = 0; i < 3; ++i) {
    if (half[i] == 0.0) half[i] = 1.0;
  }

  Eigen::MatrixXd design(n, n_terms);
  Eigen::MatrixXd rhs(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vec3 q = (correspondences[r].point - centre).cwiseQuotient(half);
    const auto m = PolynomialCamera::monomials(q);
    for (int c = 0; c < n_terms; ++c) design(r, c) = m[c];
    rhs.row(r) = correspondences[r].pixel.transpose();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  require(qr.rank() == n_terms, ErrorCode::underdetermined_fit,
          "polynomial fit: monomial matrix is rank deficient");
  const Eigen::MatrixXd normalized = qr.solve(rhs);

  // Expand prod_i ((p_i - centre_i) / half_i)^e_i binomially; the monomial
  // set is closed under lowering exponents, so every term has a slot.
  auto slot = [](int ex, int ey, int ez) {
    for (int t = 0; t < n_terms; ++t) {
      if (kMonomialPowers[t][0] == ex && kMonomialPowers[t][1] == ey &&
          kMonomialPowers[t][2] == ez) {
        return t;
      }
    }
    return -1;
  };
  auto binomial = [](int e, int k) { return e == 3 && (k == 1 || k == 2) ? 3.0 : (e == 2 && k == 1 ? 2.0 : 1.0); };

  PolynomialCamera::Coefficients coeffs;
  coeffs.fill(Vec2::Zero());
  for (int t = 0; t < n_terms; ++t) {
    const Vec2 b = normalized.row(t).transpose();
    const int* e = kMonomialPowers[t];
    for (int kx = 0; kx <= e[0]; ++kx) {
      for (int ky = 0; ky <= e[1]; ++ky) {
        for (int kz = 0; kz <= e[2]; ++kz) {
          const int k[3] = {kx, ky, kz};
          double w = 1.0;
          for (int i = 0; i < 3; ++i) {
            w *= binomial(e[i], k[i]) * std::pow(-centre[i], e[i] - k[i]) / std::pow(half[i], e[i]);
          }
          coeffs[slot(kx, ky, kz)] += w * b;
        }
      }
    }
  }
  return PolynomialCamera(coeffs);
}

}  // namespace jointpiv
