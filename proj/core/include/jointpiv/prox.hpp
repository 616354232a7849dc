#pragma once

#include <span>
#include <vector>

#include "jointpiv/energy.hpp"
#include "jointpiv/motion_grid.hpp"

namespace jointpiv {

/// argmin_c mu |c| + indicator(c >= 0) + t/2 (c - cbar)^2 in closed form.
double prox_intensity(double cbar, double t, double mu, SparsityNorm norm);
void prox_intensity(std::span<double> c, double t, double mu, SparsityNorm norm);

struct PcgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = true;
};

/// Projection onto discretely divergence-free fields. Solves the pressure
/// system D D^T phi = D u with Jacobi-preconditioned conjugate gradients and
/// keeps phi between calls so successive projections start warm.
class PoissonSolver {
 public:
  explicit PoissonSolver(GridDims dims, double tolerance = 1e-3, int max_iterations = 20);

  const GridDims& dims() const { return op_.dims(); }
  const PressureField& pressure() const { return pressure_; }
  void reset() { std::fill(pressure_.values.begin(), pressure_.values.end(), 0.0); }

  double tolerance() const { return tolerance_; }
  int max_iterations() const { return max_iterations_; }
  void set_tolerance(double tol, int max_iterations) {
    tolerance_ = tol;
    max_iterations_ = max_iterations;
  }

  /// Replaces `u` by u - D^T phi in place.
  PcgResult project(std::span<double> u);

  const PcgResult& last_result() const { return last_; }

 private:
  DivergenceOperator op_;
  PressureField pressure_;
  double tolerance_;
  int max_iterations_;
  PcgResult last_;
  std::vector<double> r_, z_, d_, q_, tmp_;
};

/// Non-fatal: an unconverged solve is reported through solver.last_result().
MotionGrid project_divfree(const MotionGrid& u, PoissonSolver& solver);

}  // namespace jointpiv
