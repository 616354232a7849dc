#pragma once

#include <span>
#include <vector>

#include "jointpiv/camera.hpp"
#include "jointpiv/image.hpp"
#include "jointpiv/motion_grid.hpp"

namespace jointpiv {

struct Particle {
  Vec3 position = Vec3::Zero();
  double intensity = 0.0;
};

using ParticleSet = std::vector<Particle>;

/// Isotropic image-plane Gaussian with peak 1, truncated at 3 sigma.
struct BlobKernel {
  double sigma = 1.0;

  explicit BlobKernel(double s = 1.0);

  double radius() const { return 3.0 * sigma; }
  double operator()(double squared_distance) const;
};

/// Pixel window of one truncated blob with the separable factors
/// gx[x - x0] * gy[y - y0] = blob(x - center). Row y covers the pixels
/// row_begin[y - y0] <= x < row_end[y - y0] inside the truncation disc.
struct BlobFootprint {
  int x0 = 0;
  int x1 = -1;
  int y0 = 0;
  int y1 = -1;
  Vec2 center = Vec2::Zero();
  std::vector<double> gx;
  std::vector<double> gy;
  std::vector<int> row_begin;
  std::vector<int> row_end;

  void compute(const Vec2& c, const BlobKernel& kernel, int width, int height);
};

/// Adds c * blob for a precomputed footprint.
void splat(Image& image, const BlobFootprint& footprint, double intensity);

/// Adds c * blob(x - center) to every pixel inside the truncation radius.
void splat(Image& image, const Vec2& center, double intensity, const BlobKernel& kernel);

Image render(std::span<const Particle> particles, const Camera& camera, const BlobKernel& kernel,
             int width, int height);

/// Renders the particles advected by one step of the flow.
Image render_warped(std::span<const Particle> particles, const MotionGrid& grid,
                    const Camera& camera, const BlobKernel& kernel, int width, int height);

Image residual(const Image& observed, const Image& predicted);

ParticleSet prune_zero(std::span<const Particle> particles);

/// Greedy clustering, brightest first: every particle absorbs the unclaimed
/// ones within `radius`, keeping the intensity-weighted mean position and the
/// summed intensity. Coincident blobs render identically after merging.
ParticleSet merge_close(std::span<const Particle> particles, double radius);

/// Converts an image of blobs rendered with `from_sigma` into one whose blobs
/// have `to_sigma`, keeping peak values: Gaussian convolution with the
/// difference width, scaled by (to/from)^2. Returns a copy if to <= from.
Image rescale_blobs(const Image& image, double from_sigma, double to_sigma);

}  // namespace jointpiv
