#pragma once

#include <span>
#include <vector>

#include "jointpiv/camera.hpp"
#include "jointpiv/image.hpp"
#include "jointpiv/motion_grid.hpp"
#include "jointpiv/scene.hpp"

namespace jointpiv {

enum class SparsityNorm { l0, l1 };

/// How incompressibility enters the energy: as a hard constraint enforced by
/// projection, or as alpha * sum over voxels of (integrated divergence)^2
/// added to the smoothness term.
struct DivergenceMode {
  enum class Kind { hard, soft };
  Kind kind = Kind::hard;
  double alpha = 0.0;

  static DivergenceMode hard() { return {Kind::hard, 0.0}; }
  static DivergenceMode soft(double alpha) { return {Kind::soft, alpha}; }
  bool is_hard() const { return kind == Kind::hard; }
};

struct EnergyParams {
  double lambda = 0.04;
  double mu = 1e-4;
  SparsityNorm norm = SparsityNorm::l0;
  DivergenceMode divergence = DivergenceMode::hard();
  double sigma = 1.0;

  void validate() const;
};

/// Which time steps contribute to the data term. Restricting to the first
/// frame gives the particle-only energy of the sequential baseline.
struct DataTermOptions {
  bool first_frame = true;
  bool second_frame = true;
};

/// A scalar term together with its gradient in the stacked variables
/// p (3Q), c (Q) and u (3NML).
struct TermGradient {
  double value = 0.0;
  std::vector<double> grad_p;
  std::vector<double> grad_c;
  std::vector<double> grad_u;
};

/// Sum over both frames of (1/K) sum_k ||I_k - rendered||^2, rendered frame
/// t1 using p + u(p).
TermGradient data_term(std::span<const Particle> particles, const MotionGrid& grid,
                       std::span<const Camera> cameras, const ImageSet& images,
                       const BlobKernel& kernel, DataTermOptions options = {});

/// Differentiable part of the smoothness term: sum_l int |grad u_l|^2, plus
/// alpha * ||D u||^2 in soft-divergence mode.
QuadraticValue smoothness_term(const MotionGrid& grid, const EnergyParams& params);

/// sum_i |c_i| (L1) or the count of nonzero c_i (L0); +inf if any c_i < 0.
double sparsity_term(std::span<const double> intensities, SparsityNorm norm);

struct EnergyState {
  double value = 0.0;   // E = H + mu * E_Sp (hard constraint excluded)
  double smooth = 0.0;  // H = E_D/2 + lambda/2 * smoothness
  std::vector<double> grad_p;
  std::vector<double> grad_c;
  std::vector<double> grad_u;
};

EnergyState total_energy(std::span<const Particle> particles, const MotionGrid& grid,
                         std::span<const Camera> cameras, const ImageSet& images,
                         const EnergyParams& params, DataTermOptions options = {});

/// Repeated evaluation of H on stacked block vectors with reused buffers.
/// The grid geometry, cameras and observations are fixed at construction.
class SmoothEnergy {
 public:
  SmoothEnergy(std::vector<Camera> cameras, ImageSet images, GridDims dims, double spacing,
               EnergyParams params, DataTermOptions options = {});

  struct Result {
    double value = 0.0;
    std::vector<double> grad_p;
    std::vector<double> grad_c;
    std::vector<double> grad_u;
  };

  /// H and its three partial gradients. Gradients of inactive blocks are
  /// still returned; callers ignore what they do not need.
  void evaluate(std::span<const double> p, std::span<const double> c, std::span<const double> u,
                Result& out);

  const EnergyParams& params() const { return params_; }
  const ImageSet& images() const { return images_; }
  std::span<const Camera> cameras() const { return cameras_; }
  GridDims dims() const { return dims_; }
  double spacing() const { return spacing_; }

 private:
  std::vector<Camera> cameras_;
  ImageSet images_;
  GridDims dims_;
  double spacing_;
  EnergyParams params_;
  DataTermOptions options_;
  BlobKernel kernel_;
  Image predicted_;
};

/// Splits particles into stacked position and intensity vectors and back.
void stack_particles(std::span<const Particle> particles, std::vector<double>& p,
                     std::vector<double>& c);
ParticleSet unstack_particles(std::span<const double> p, std::span<const double> c);

}  // namespace jointpiv
