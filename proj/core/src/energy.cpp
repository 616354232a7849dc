#include "jointpiv/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jointpiv/error.hpp"

namespace jointpiv {

namespace {

// Accumulates E_D and its gradients for one frame. `dq` receives dE_D/dq for
// the rendered positions q of that frame.
double frame_term(std::span<const double> c, const std::vector<Vec3>& q,
                  std::span<const Camera> cameras, std::span<const Image> observed,
                  const BlobKernel& kernel, Image& predicted, std::vector<double>& grad_c,
                  std::vector<Vec3>& dq) {
  const std::size_t n = q.size();
  const double inv_k = 1.0 / static_cast<double>(cameras.size());
  const double inv_s2 = 1.0 / (kernel.sigma * kernel.sigma);
  double value = 0.0;
  thread_local std::vector<BlobFootprint> footprints;
  if (footprints.size() < n) footprints.resize(n);

  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const Image& obs = observed[k];
    if (predicted.width() != obs.width() || predicted.height() != obs.height()) {
      predicted = Image(obs.width(), obs.height());
    } else {
      std::fill(predicted.pixels().begin(), predicted.pixels().end(), 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      footprints[i].compute(project(cameras[k], q[i]), kernel, obs.width(), obs.height());
      splat(predicted, footprints[i], c[i]);
    }

    // From here on `predicted` holds the residual observed - rendered.
    auto o = obs.pixels();
    auto pr = predicted.pixels();
    double sum = 0.0;
    for (std::size_t x = 0; x < o.size(); ++x) {
      const double d = o[x] - pr[x];
      pr[x] = d;
      sum += d * d;
    }
    value += inv_k * sum;

    for (std::size_t i = 0; i < n; ++i) {
      const BlobFootprint& f = footprints[i];
      const Vec2& m = f.center;
      double gc = 0.0;
      double gx = 0.0;
      double gy = 0.0;
      const double* fx = f.gx.data() - f.x0;
      for (int y = f.y0; y <= f.y1; ++y) {
        const double* res = &pr[obs.index(0, y)];
        double row_c = 0.0;
        double row_x = 0.0;
        for (int x = f.row_begin[y - f.y0]; x < f.row_end[y - f.y0]; ++x) {
          const double rg = res[x] * fx[x];
          row_c += rg;
          row_x += rg * x;
        }
        const double wy = f.gy[y - f.y0];
        gc += wy * row_c;
        gx += wy * (row_x - m.x() * row_c);
        gy += wy * row_c * (y - m.y());
      }
      grad_c[i] += -2.0 * inv_k * gc;
      const Vec2 dm = -2.0 * inv_k * c[i] * inv_s2 * Vec2(gx, gy);
      dq[i] += project_jacobian(cameras[k], q[i]).transpose() * dm;
    }
  }
  return value;
}

double data_term_impl(std::span<const double> p, std::span<const double> c,
                      const MotionGrid& grid, std::span<const Camera> cameras,
                      const ImageSet& images, const BlobKernel& kernel, DataTermOptions options,
                      Image& predicted, std::vector<double>& grad_p, std::vector<double>& grad_c,
                      std::vector<double>& grad_u) {
  const std::size_t n = c.size();
  require(p.size() == 3 * n, ErrorCode::dimension_mismatch,
          "data term: position and intensity blocks disagree");
  require(cameras.size() == images.t0.size() && cameras.size() == images.t1.size(),
          ErrorCode::dimension_mismatch, "data term: camera and image counts differ");
  require(!cameras.empty(), ErrorCode::invalid_argument, "data term: no cameras");

  grad_p.assign(3 * n, 0.0);
  grad_c.assign(n, 0.0);
  grad_u.assign(grid.coeffs().size(), 0.0);

  std::vector<Vec3> base(n);
  for (std::size_t i = 0; i < n; ++i) base[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};

  double value = 0.0;
  std::vector<Vec3> dq(n, Vec3::Zero());
  if (options.first_frame) {
    value += frame_term(c, base, cameras, images.t0, kernel, predicted, grad_c, dq);
    for (std::size_t i = 0; i < n; ++i) {
      for (int l = 0; l < 3; ++l) grad_p[3 * i + l] += dq[i][l];
    }
  }
  if (options.second_frame) {
    std::vector<Vec3> moved(n);
    std::vector<TrilinearStencil> st(n);
    const auto u = grid.coeffs();
    for (std::size_t i = 0; i < n; ++i) {
      st[i] = stencil(grid, base[i]);
      Vec3 disp = Vec3::Zero();
      for (int v = 0; v < 8; ++v) {
        const double* uv = &u[3 * st[i].vertex[v]];
        disp += st[i].weight[v] * Vec3(uv[0], uv[1], uv[2]);
      }
      moved[i] = base[i] + disp;
    }
    std::fill(dq.begin(), dq.end(), Vec3::Zero());
    value += frame_term(c, moved, cameras, images.t1, kernel, predicted, grad_c, dq);
    for (std::size_t i = 0; i < n; ++i) {
      // d(p + u(p))/dp = I + sum_v u_v (grad w_v)^T
      Eigen::Matrix3d jac = Eigen::Matrix3d::Identity();
      for (int v = 0; v < 8; ++v) {
        const double* uv = &u[3 * st[i].vertex[v]];
        jac += Vec3(uv[0], uv[1], uv[2]) * st[i].weight_gradient[v].transpose();
        for (int l = 0; l < 3; ++l) grad_u[3 * st[i].vertex[v] + l] += st[i].weight[v] * dq[i][l];
      }
      const Vec3 gp = jac.transpose() * dq[i];
      for (int l = 0; l < 3; ++l) grad_p[3 * i + l] += gp[l];
    }
  }
  return value;
}

}  // namespace

void EnergyParams::validate() const {
  require(lambda >= 0.0 && mu >= 0.0 && divergence.alpha >= 0.0, ErrorCode::invalid_argument,
          "energy parameters must be nonnegative");
  require(sigma > 0.0, ErrorCode::invalid_argument, "blob sigma must be positive");
}

void stack_particles(std::span<const Particle> particles, std::vector<double>& p,
                     std::vector<double>& c) {
  p.resize(3 * particles.size());
  c.resize(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    for (int l = 0; l < 3; ++l) p[3 * i + l] = particles[i].position[l];
    c[i] = particles[i].intensity;
  }
}

ParticleSet unstack_particles(std::span<const double> p, std::span<const double> c) {
  require(p.size() == 3 * c.size(), ErrorCode::dimension_mismatch,
          "position and intensity blocks disagree");
  ParticleSet out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    out[i].position = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    out[i].intensity = c[i];
  }
  return out;
}

TermGradient data_term(std::span<const Particle> particles, const MotionGrid& grid,
                       std::span<const Camera> cameras, const ImageSet& images,
                       const BlobKernel& kernel, DataTermOptions options) {
  std::vector<double> p;
  std::vector<double> c;
  stack_particles(particles, p, c);
  TermGradient out;
  Image predicted;
  out.value = data_term_impl(p, c, grid, cameras, images, kernel, options, predicted, out.grad_p,
                             out.grad_c, out.grad_u);
  return out;
}

QuadraticValue smoothness_term(const MotionGrid& grid, const EnergyParams& params) {
  QuadraticValue out = gradient_energy(grid);
  if (!params.divergence.is_hard() && params.divergence.alpha > 0.0) {
    const DivergenceOperator d(grid.dims());
    const std::vector<double> div = d.apply(grid.coeffs());
    double sq = 0.0;
    for (double v : div) sq += v * v;
    out.value += params.divergence.alpha * sq;
    const std::vector<double> back = d.apply_transpose(div);
    for (std::size_t i = 0; i < back.size(); ++i) {
      out.gradient[i] += 2.0 * params.divergence.alpha * back[i];
    }
  }
  return out;
}

double sparsity_term(std::span<const double> intensities, SparsityNorm norm) {
  double sum = 0.0;
  for (double c : intensities) {
    if (c < 0.0) return std::numeric_limits<double>::infinity();
    sum += norm == SparsityNorm::l0 ? (c != 0.0 ? 1.0 : 0.0) : c;
  }
  return sum;
}

EnergyState total_energy(std::span<const Particle> particles, const MotionGrid& grid,
                         std::span<const Camera> cameras, const ImageSet& images,
                         const EnergyParams& params, DataTermOptions options) {
  params.validate();
  const TermGradient data = data_term(particles, grid, cameras, images, BlobKernel(params.sigma),
                                      options);
  const QuadraticValue smooth = smoothness_term(grid, params);
  std::vector<double> c(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) c[i] = particles[i].intensity;

  EnergyState out;
  out.smooth = 0.5 * data.value + 0.5 * params.lambda * smooth.value;
  out.value = out.smooth + params.mu * sparsity_term(c, params.norm);
  out.grad_p = data.grad_p;
  out.grad_c = data.grad_c;
  out.grad_u = data.grad_u;
  for (double& g : out.grad_p) g *= 0.5;
  for (double& g : out.grad_c) g *= 0.5;
  for (std::size_t i = 0; i < out.grad_u.size(); ++i) {
    out.grad_u[i] = 0.5 * out.grad_u[i] + 0.5 * params.lambda * smooth.gradient[i];
  }
  return out;
}

SmoothEnergy::SmoothEnergy(std::vector<Camera> cameras, ImageSet images, GridDims dims,
                           double spacing, EnergyParams params, DataTermOptions options)
    : cameras_(std::move(cameras)),
      images_(std::move(images)),
      dims_(dims),
      spacing_(spacing),
      params_(params),
      options_(options),
      kernel_(params.sigma) {
  params_.validate();
  images_.validate();
  require(cameras_.size() == images_.camera_count(), ErrorCode::dimension_mismatch,
          "camera count does not match image set");
}

void SmoothEnergy::evaluate(std::span<const double> p, std::span<const double> c,
                            std::span<const double> u, Result& out) {
  const MotionGrid grid(dims_, spacing_, std::vector<double>(u.begin(), u.end()));
  const double data = data_term_impl(p, c, grid, cameras_, images_, kernel_, options_,
                                     predicted_, out.grad_p, out.grad_c, out.grad_u);
  for (double& g : out.grad_p) g *= 0.5;
  for (double& g : out.grad_c) g *= 0.5;
  double smooth_value = 0.0;
  if (params_.lambda > 0.0) {
    const QuadraticValue smooth = smoothness_term(grid, params_);
    smooth_value = smooth.value;
    for (std::size_t i = 0; i < out.grad_u.size(); ++i) {
      out.grad_u[i] = 0.5 * out.grad_u[i] + 0.5 * params_.lambda * smooth.gradient[i];
    }
  } else {
    for (double& g : out.grad_u) g *= 0.5;
  }
  out.value = 0.5 * data + 0.5 * params_.lambda * smooth_value;
}

}  // namespace jointpiv
