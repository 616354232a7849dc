#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "jointpiv/energy.hpp"
#include "jointpiv/error.hpp"
#include "support/generators.hpp"
#include "support/scenes.hpp"

namespace jointpiv {
namespace {

using testing::for_all;
using testing::Gen;
using testing::SmallScene;

ImageSet blank_images(std::size_t cameras, int w, int h) {
  ImageSet s;
  for (std::size_t k = 0; k < cameras; ++k) {
    s.t0.emplace_back(w, h);
    s.t1.emplace_back(w, h);
  }
  return s;
}

double squared_distance(const Image& a, const Image& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    sum += d * d;
  }
  return sum;
}

// Data term straight from its definition: both frames, averaged over cameras.
double data_oracle(const SmallScene& s) {
  const BlobKernel kernel(s.params.sigma);
  const auto K = static_cast<double>(s.cameras.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < s.cameras.size(); ++k) {
    const int w = s.images.t0[k].width();
    const int h = s.images.t0[k].height();
    sum += squared_distance(s.images.t0[k], render(s.particles, s.cameras[k], kernel, w, h)) / K;
    sum += squared_distance(s.images.t1[k],
                            render_warped(s.particles, s.grid, s.cameras[k], kernel, w, h)) / K;
  }
  return sum;
}

// Soft divergence penalty from per-voxel divergences.
double soft_penalty_oracle(const MotionGrid& g, double alpha) {
  const GridDims d = g.dims();
  double sum = 0.0;
  for (int k = 0; k + 1 < d.nz; ++k)
    for (int j = 0; j + 1 < d.ny; ++j)
      for (int i = 0; i + 1 < d.nx; ++i) {
        const double v = voxel_divergence(g, {i, j, k});
        sum += v * v;
      }
  return alpha * sum;
}

MotionGrid saddle_field(GridDims d) {
  MotionGrid g(d, 1.0);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) g.set(i, j, k, {double(i), -double(j), 0.0});
  return g;
}

TEST(DataTerm, EmptySceneIsZero) {
  const Box volume = Box::from_size({20, 20, 20});
  const auto cams = default_rig(32, 32, volume);
  const ImageSet images = blank_images(cams.size(), 32, 32);
  const TermGradient t = data_term({}, MotionGrid({5, 5, 5}, 5.0), cams, images, BlobKernel(1.0));
  EXPECT_EQ(t.value, 0.0);
  EXPECT_TRUE(t.grad_p.empty());
  for (double v : t.grad_u) EXPECT_EQ(v, 0.0);
}

TEST(DataTerm, PerfectFitHasZeroValueAndGradients) {
  Gen g(51);
  const Box volume = Box::from_size({20, 20, 20});
  const auto cams = default_rig(32, 32, volume);
  const ParticleSet ps = g.particles(6, {Vec3::Constant(3), Vec3::Constant(17)});
  const MotionGrid flow = g.grid({5, 5, 5}, 5.0, 0.5);
  ImageSet images;
  for (const Camera& cam : cams) {
    images.t0.push_back(render(ps, cam, BlobKernel(1.2), 32, 32));
    images.t1.push_back(render_warped(ps, flow, cam, BlobKernel(1.2), 32, 32));
  }
  const TermGradient t = data_term(ps, flow, cams, images, BlobKernel(1.2));
  EXPECT_EQ(t.value, 0.0);
  for (double v : t.grad_p) EXPECT_EQ(v, 0.0);
  for (double v : t.grad_c) EXPECT_EQ(v, 0.0);
  for (double v : t.grad_u) EXPECT_EQ(v, 0.0);
}

TEST(DataTerm, MatchesRenderOracle) {
  for_all(30, 52, [](Gen& g) {
    const SmallScene s = testing::random_small_scene(g);
    const TermGradient t = data_term(s.particles, s.grid, s.cameras, s.images, BlobKernel(s.params.sigma));
    const double oracle = data_oracle(s);
    EXPECT_NEAR(t.value, oracle, 1e-12 * std::max(1.0, oracle));
  });
}

TEST(DataTerm, FirstFrameOnlyIgnoresFlow) {
  Gen g(53);
  const SmallScene s = testing::random_small_scene(g);
  const TermGradient t = data_term(s.particles, s.grid, s.cameras, s.images,
                                   BlobKernel(s.params.sigma), {true, false});
  for (double v : t.grad_u) EXPECT_EQ(v, 0.0);
  SmallScene moved = s;
  for (double& v : moved.grid.values()) v += 3.0;
  const TermGradient t2 = data_term(moved.particles, moved.grid, moved.cameras, moved.images,
                                    BlobKernel(s.params.sigma), {true, false});
  EXPECT_EQ(t.value, t2.value);
}

TEST(DataTerm, CameraCountMismatch) {
  Gen g(54);
  SmallScene s = testing::random_small_scene(g);
  s.images.t0.pop_back();
  s.images.t1.pop_back();
  EXPECT_THROW(data_term(s.particles, s.grid, s.cameras, s.images, BlobKernel(1.0)), Error);
}

TEST(EnergyGradient, MatchesFiniteDifferences) {
  for_all(15, 55, [](Gen& g) {
    const testing::GradientCheck r = testing::check_energy_gradient(testing::random_small_scene(g));
    EXPECT_LT(r.position, 1e-4);
    EXPECT_LT(r.intensity, 1e-4);
    EXPECT_LT(r.flow, 1e-4);
  });
}

TEST(Smoothness, ConstantFieldIsZeroInBothModes) {
  MotionGrid g({4, 4, 4}, 2.0);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) g.set(i, j, k, {0.3, -0.2, 1.0});
  EnergyParams hard;
  EnergyParams soft;
  soft.divergence = DivergenceMode::soft(64.0);
  EXPECT_NEAR(smoothness_term(g, hard).value, 0.0, 1e-14);
  EXPECT_NEAR(smoothness_term(g, soft).value, 0.0, 1e-14);
}

TEST(Smoothness, SaddleFieldHasNoDivergencePenalty) {
  const GridDims d{3, 4, 2};
  const MotionGrid g = saddle_field(d);
  const double volume = 2.0 * 3.0 * 1.0;
  EnergyParams hard;
  EnergyParams soft;
  soft.divergence = DivergenceMode::soft(64.0);
  EXPECT_NEAR(smoothness_term(g, hard).value, 2.0 * volume, 1e-12);
  EXPECT_NEAR(smoothness_term(g, soft).value, 2.0 * volume, 1e-12);
}

TEST(Smoothness, SoftModeAddsDivergencePenalty) {
  for_all(30, 56, [](Gen& g) {
    const MotionGrid grid = g.grid(g.dims(2, 5), g.uniform(0.5, 3.0));
    EnergyParams p;
    const double alpha = g.uniform(0.0, 100.0);
    p.divergence = DivergenceMode::soft(alpha);
    const double expected = gradient_energy(grid).value + soft_penalty_oracle(grid, alpha);
    EXPECT_NEAR(smoothness_term(grid, p).value, expected, 1e-10 * std::max(1.0, expected));

    const QuadraticValue q = smoothness_term(grid, p);
    const auto f = [&](const std::vector<double>& x) {
      return smoothness_term(MotionGrid(grid.dims(), grid.spacing(), x), p).value;
    };
    for (int n = 0; n < 10; ++n) {
      const auto i = static_cast<std::size_t>(g.integer(0, static_cast<int>(grid.values().size()) - 1));
      EXPECT_LT(testing::rel_err(q.gradient[i], testing::central_difference(f, grid.values(), i, 1e-4), 1e-6), 1e-6);
    }
  });
}

TEST(Sparsity, CountsAndSums) {
  const std::vector<double> zero{0, 0, 0};
  const std::vector<double> c{1.0, 0.3, 0.0};
  EXPECT_EQ(sparsity_term(zero, SparsityNorm::l0), 0.0);
  EXPECT_EQ(sparsity_term(c, SparsityNorm::l0), 2.0);
  EXPECT_DOUBLE_EQ(sparsity_term(c, SparsityNorm::l1), 1.3);
  const std::vector<double> negative{-0.1};
  EXPECT_EQ(sparsity_term(negative, SparsityNorm::l0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(sparsity_term(negative, SparsityNorm::l1), std::numeric_limits<double>::infinity());
}

TEST(TotalEnergy, AllZeroIsZero) {
  const Box volume = Box::from_size({20, 20, 20});
  const auto cams = default_rig(32, 32, volume);
  const EnergyState e = total_energy({}, MotionGrid({5, 5, 5}, 5.0), cams, blank_images(4, 32, 32), {});
  EXPECT_EQ(e.value, 0.0);
}

TEST(TotalEnergy, WithoutRegularizersIsHalfTheDataTerm) {
  Gen g(57);
  SmallScene s = testing::random_small_scene(g);
  s.params.lambda = 0.0;
  s.params.mu = 0.0;
  s.params.divergence = DivergenceMode::hard();
  const EnergyState e = total_energy(s.particles, s.grid, s.cameras, s.images, s.params);
  EXPECT_NEAR(e.value, 0.5 * data_oracle(s), 1e-12 * e.value);
}

TEST(TotalEnergy, SumsIndependentComponents) {
  for_all(30, 58, [](Gen& g) {
    SmallScene s = testing::random_small_scene(g);
    s.params.norm = g.coin() ? SparsityNorm::l0 : SparsityNorm::l1;
    s.params.mu = g.uniform(0.0, 0.1);
    const EnergyState e = total_energy(s.particles, s.grid, s.cameras, s.images, s.params);
    const double smooth = gradient_energy(s.grid).value +
                          (s.params.divergence.is_hard() ? 0.0 : soft_penalty_oracle(s.grid, s.params.divergence.alpha));
    double sparsity = 0.0;
    for (const Particle& p : s.particles)
      sparsity += s.params.norm == SparsityNorm::l0 ? (p.intensity != 0.0) : p.intensity;
    const double expected = 0.5 * data_oracle(s) + 0.5 * s.params.lambda * smooth + s.params.mu * sparsity;
    EXPECT_NEAR(e.value, expected, 1e-12 * std::max(1.0, expected));
  });
}

TEST(SmoothEnergy, AgreesWithTotalEnergy) {
  for_all(10, 59, [](Gen& g) {
    const SmallScene s = testing::random_small_scene(g);
    SmoothEnergy energy(s.cameras, s.images, s.grid.dims(), s.grid.spacing(), s.params);
    std::vector<double> p, c;
    stack_particles(s.particles, p, c);
    SmoothEnergy::Result r;
    energy.evaluate(p, c, s.grid.values(), r);
    const EnergyState e = total_energy(s.particles, s.grid, s.cameras, s.images, s.params);
    EXPECT_NEAR(r.value, e.smooth, 1e-12 * std::max(1.0, e.smooth));
    EXPECT_LT(testing::block_rel_err(r.grad_p, e.grad_p), 1e-12);
    EXPECT_LT(testing::block_rel_err(r.grad_c, e.grad_c), 1e-12);
    EXPECT_LT(testing::block_rel_err(r.grad_u, e.grad_u), 1e-12);
  });
}

TEST(Params, Validation) {
  EnergyParams p;
  p.lambda = -1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.divergence = DivergenceMode::soft(-2.0);
  EXPECT_THROW(p.validate(), Error);
}

TEST(Stacking, RoundTrips) {
  Gen g(60);
  const ParticleSet ps = g.particles(7, Box::from_size({5, 5, 5}));
  std::vector<double> p, c;
  stack_particles(ps, p, c);
  ASSERT_EQ(p.size(), 21u);
  const ParticleSet back = unstack_particles(p, c);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(back[i].position, ps[i].position);
    EXPECT_EQ(back[i].intensity, ps[i].intensity);
  }
}

}  // namespace
}  // namespace jointpiv
