#pragma once

#include <span>

#include "jointpiv/motion_grid.hpp"
#include "jointpiv/scene.hpp"

namespace jointpiv {

struct FlowMetrics {
  double aee = 0.0;  // mean endpoint error, voxels
  double aae = 0.0;  // mean 3D angle, degrees
  double aad = 0.0;  // mean |voxel divergence| of the estimate
};

/// Compares two flows vertex by vertex. A truth grid with a different
/// lattice but the same extent is resampled onto the estimate's lattice.
FlowMetrics flow_metrics(const MotionGrid& estimate, const MotionGrid& truth);

struct ParticleMetrics {
  double precision = 1.0;
  double recall = 1.0;
  std::size_t matched = 0;
  double threshold = 1.0;
};

/// Greedy one-to-one matching by ascending distance among pairs closer than
/// `threshold` voxels.
ParticleMetrics particle_metrics(std::span<const Particle> estimate,
                                 std::span<const Particle> truth, double threshold = 1.0);

}  // namespace jointpiv
