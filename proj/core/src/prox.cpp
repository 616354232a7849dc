#include "jointpiv/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jointpiv/error.hpp"

namespace jointpiv {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

double prox_intensity(double cbar, double t, double mu, SparsityNorm norm) {
  if (norm == SparsityNorm::l0) {
    return (t * cbar * cbar < 2.0 * mu || cbar < 0.0) ? 0.0 : cbar;
  }
  return std::max(0.0, cbar - mu / t);
}

void prox_intensity(std::span<double> c, double t, double mu, SparsityNorm norm) {
  require(t > 0.0 && mu >= 0.0, ErrorCode::invalid_argument,
          "intensity prox needs t > 0 and mu >= 0");
  for (double& v : c) v = prox_intensity(v, t, mu, norm);
}

PoissonSolver::PoissonSolver(GridDims dims, double tolerance, int max_iterations)
    : op_(dims), pressure_(dims), tolerance_(tolerance), max_iterations_(max_iterations) {}

PcgResult PoissonSolver::project(std::span<double> u) {
  require(u.size() == op_.cols(), ErrorCode::dimension_mismatch,
          "divergence projection: grid does not match the solver");
  const std::size_t n = op_.rows();
  // Every row of D holds 24 entries of magnitude 1/4.
  constexpr double kDiagonal = 24.0 / 16.0;
  r_.resize(n);
  z_.resize(n);
  d_.resize(n);
  q_.resize(n);
  tmp_.resize(op_.cols());
  std::vector<double>& phi = pressure_.values;

  std::vector<double> b = op_.apply(u);
  const double b_norm = std::sqrt(dot(b, b));
  PcgResult result;
  if (b_norm == 0.0) {
    reset();
    last_ = result;
    return result;
  }

  auto residual = [&] {
    op_.apply_transpose(phi, tmp_);
    op_.apply(tmp_, q_);
    for (std::size_t i = 0; i < n; ++i) r_[i] = b[i] - q_[i];
  };
  residual();
  double r_norm = std::sqrt(dot(r_, r_));
  for (std::size_t i = 0; i < n; ++i) z_[i] = r_[i] / kDiagonal;
  d_ = z_;
  double rz = dot(r_, z_);
  int it = 0;
  while (r_norm > tolerance_ * b_norm && it < max_iterations_) {
    op_.apply_transpose(d_, tmp_);
    op_.apply(tmp_, q_);
    const double dq = dot(d_, q_);
    if (dq <= 0.0) break;
    const double alpha = rz / dq;
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] += alpha * d_[i];
      r_[i] -= alpha * q_[i];
    }
    ++it;
    if (it % 50 == 0) residual();
    for (std::size_t i = 0; i < n; ++i) z_[i] = r_[i] / kDiagonal;
    const double rz_next = dot(r_, z_);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) d_[i] = z_[i] + beta * d_[i];
    r_norm = std::sqrt(dot(r_, r_));
  }
  residual();
  r_norm = std::sqrt(dot(r_, r_));

  op_.apply_transpose(phi, tmp_);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] -= tmp_[i];

  result.iterations = it;
  result.relative_residual = r_norm / b_norm;
  result.converged = result.relative_residual <= tolerance_;
  last_ = result;
  return result;
}

MotionGrid project_divfree(const MotionGrid& u, PoissonSolver& solver) {
  require(u.dims() == solver.dims(), ErrorCode::dimension_mismatch,
          "divergence projection: grid does not match the solver");
  MotionGrid out = u;
  solver.project(out.coeffs());
  return out;
}

}  // namespace jointpiv
