#pragma once

#include <span>
#include <string>
#include <vector>

#include "jointpiv/camera.hpp"
#include "jointpiv/energy.hpp"
#include "jointpiv/image.hpp"
#include "jointpiv/ipalm.hpp"
#include "jointpiv/motion_grid.hpp"
#include "jointpiv/prox.hpp"
#include "jointpiv/scene.hpp"

namespace jointpiv {

struct SolverConfig {
  int pyramid_levels = 10;
  double pyramid_factor = 0.94;
  double sigma = 1.0;           // blob size of the recorded images, reached at the last level
  double grid_subsample = 10.0; // finest flow lattice spacing in voxels
  double output_spacing = 0.0;  // 0 keeps the finest lattice
  double lambda = 0.04;
  double mu = 1e-4;
  double epsilon_start = 0.8;
  double epsilon_end = 2.0;
  double min_intensity = 0.1;
  DivergenceMode divergence = DivergenceMode::hard();
  SparsityNorm norm = SparsityNorm::l0;
  int max_inner_iterations = 40;
  double inner_tolerance = 1e-6;
  double pcg_tolerance = 1e-3;
  int pcg_iterations = 20;
  double final_pcg_tolerance = 1e-12;
  int final_pcg_iterations = 100000;
  int max_combinations = 64;
  double merge_radius = 1.0;  // particles closer than this are fused after each level
  int threads = 0;  // recorded only; every stage runs on the calling thread

  void validate() const;

  /// Blob size, lattice spacing and epipolar tolerance used at `level`
  /// (0 is the coarsest).
  double level_sigma(int level) const;
  double level_spacing(int level) const;
  double level_epsilon(int level) const;
};

struct LevelReport {
  int level = 0;
  double sigma = 1.0;
  double spacing = 1.0;
  GridDims dims;
  double epsilon = 0.0;
  std::size_t proposed = 0;
  std::size_t pruned = 0;
  std::size_t particles = 0;
  double energy = 0.0;
  ConvergenceReport convergence;
  PcgResult pressure;
};

struct RunReport {
  std::vector<LevelReport> levels;
  bool no_particles = false;  // no level produced a single candidate
  PcgResult final_projection;
  double max_divergence = 0.0;
  double seconds = 0.0;
  std::string mode = "joint";
};

struct Reconstruction {
  ParticleSet particles;
  MotionGrid flow;
  RunReport report;
};

/// Coarse-to-fine joint estimation of particles and flow from two time steps.
Reconstruction reconstruct(const ImageSet& images, std::span<const Camera> cameras,
                           const Box& volume, const SolverConfig& config);

/// Baseline: particles from the first time step alone, then flow with the
/// particles frozen.
Reconstruction reconstruct_sequential(const ImageSet& images, std::span<const Camera> cameras,
                                      const Box& volume, const SolverConfig& config);

/// Flow-only estimation for a known particle set.
Reconstruction reconstruct_flow(const ImageSet& images, std::span<const Camera> cameras,
                                const Box& volume, std::span<const Particle> particles,
                                const SolverConfig& config);

}  // namespace jointpiv
