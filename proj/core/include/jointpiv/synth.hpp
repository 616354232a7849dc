#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "jointpiv/camera.hpp"
#include "jointpiv/image.hpp"
#include "jointpiv/motion_grid.hpp"
#include "jointpiv/scene.hpp"

namespace jointpiv {

struct UniformFlow {
  Vec3 displacement = Vec3::Zero();
};

/// u(x) = omega * axis x (x - center).
struct RigidRotation {
  Vec3 axis = Vec3::UnitZ();
  double omega = 0.0;
  Vec3 center = Vec3::Zero();
};

/// u = (a_x cos X sin Y sin Z, a_y sin X cos Y sin Z, a_z sin X sin Y cos Z)
/// with X = k_x x + phase_x etc. Divergence-free when a . k = 0.
struct TaylorGreen {
  Vec3 amplitude = Vec3::Zero();
  Vec3 wavenumber = Vec3::Zero();
  Vec3 phase = Vec3::Zero();

  /// One period across x and y, half a period across z, scaled so that the
  /// largest speed in the volume is `max_speed`.
  static TaylorGreen for_volume(const Box& volume, double max_speed);
};

/// u[flow_axis] = rate * (x[normal_axis] - offset).
struct ShearFlow {
  int normal_axis = 2;
  int flow_axis = 0;
  double rate = 0.0;
  double offset = 0.0;
};

using AnalyticFlow = std::variant<UniformFlow, RigidRotation, TaylorGreen, ShearFlow>;

Vec3 velocity(const AnalyticFlow& flow, const Vec3& x);
/// Exact divergence from the analytic partial derivatives.
double divergence(const AnalyticFlow& flow, const Vec3& x);
void validate(const AnalyticFlow& flow);

/// Parses "uniform:dx,dy,dz", "rotation:wx,wy,wz", "shear:normal,flow,rate",
/// "taylor_green:max_speed" or "taylor_green:ax,ay,az,kx,ky,kz". Rotation
/// and shear are centred in the volume; the short Taylor-Green form uses
/// TaylorGreen::for_volume.
AnalyticFlow parse_flow(const std::string& text, const Box& volume);
std::string describe(const AnalyticFlow& flow);

/// Four pinhole cameras viewing the volume at +-35 degrees about y and
/// +-18 degrees about x, looking at its centre, scaled so the whole volume
/// fits in a width x height image with a 4 pixel border.
std::vector<Camera> default_rig(int width, int height, const Box& volume);

struct SceneOptions {
  double ppp = 0.05;
  int width = 300;
  int height = 160;
  Box volume = Box::from_size({200.0, 100.0, 60.0});
  double sigma = 1.0;
  double noise = 0.0;  // standard deviation of additive Gaussian pixel noise
  std::uint64_t seed = 1;
  double truth_spacing = 10.0;
};

struct SyntheticScene {
  ParticleSet particles_t0;
  ParticleSet particles_t1;
  MotionGrid truth_flow;
  ImageSet images;
  std::vector<Camera> cameras;
  Box volume;
  double ppp = 0.0;
  double sigma = 1.0;
};

/// Seeds ppp * width * height particles uniformly in the volume with
/// intensities in [0.5, 1], advects them by one explicit Euler step and
/// renders both frames into every camera of the default rig.
SyntheticScene generate(const AnalyticFlow& flow, const SceneOptions& options);
SyntheticScene generate(const AnalyticFlow& flow, const SceneOptions& options,
                        std::vector<Camera> cameras);

MotionGrid sample_truth(const AnalyticFlow& flow, GridDims dims, double spacing);

}  // namespace jointpiv
