#pragma once

// Hand-rolled generators for property tests. Every case derives its own
// seed from the suite seed so a failure can be replayed in isolation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "jointpiv/camera.hpp"
#include "jointpiv/motion_grid.hpp"
#include "jointpiv/scene.hpp"

namespace jointpiv::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform() < p; }

  Vec3 vec3(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  Vec3 in_box(const Box& b) {
    return {uniform(b.lo.x(), b.hi.x()), uniform(b.lo.y(), b.hi.y()), uniform(b.lo.z(), b.hi.z())};
  }

  GridDims dims(int lo, int hi) { return {integer(lo, hi), integer(lo, hi), integer(lo, hi)}; }

  MotionGrid grid(GridDims d, double spacing, double amplitude = 1.0) {
    MotionGrid g(d, spacing);
    for (double& v : g.values()) v = normal(amplitude);
    return g;
  }

  std::vector<double> vector(std::size_t n, double sd = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = normal(sd);
    return v;
  }

  ParticleSet particles(std::size_t n, const Box& volume, double cmin = 0.5, double cmax = 1.0) {
    ParticleSet out(n);
    for (Particle& p : out) {
      p.position = in_box(volume);
      p.intensity = uniform(cmin, cmax);
    }
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Runs `property` on `cases` independently seeded generators and stops at
/// the first failing case, naming its seed.
inline void for_all(int cases, std::uint64_t suite_seed, const std::function<void(Gen&)>& property) {
  for (int i = 0; i < cases; ++i) {
    const std::uint64_t seed = suite_seed * 1000003u + static_cast<std::uint64_t>(i);
    SCOPED_TRACE("property case " + std::to_string(i) + " seed " + std::to_string(seed));
    Gen g(seed);
    property(g);
    if (::testing::Test::HasFatalFailure() || ::testing::Test::HasNonfatalFailure()) return;
  }
}

/// Relative difference with an absolute floor.
inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f along coordinate i of x.
template <class F>
double central_difference(F&& f, std::vector<double> x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

}  // namespace jointpiv::testing
