#pragma once

#include <optional>
#include <span>
#include <vector>

#include "jointpiv/camera.hpp"
#include "jointpiv/image.hpp"
#include "jointpiv/scene.hpp"

namespace jointpiv {

struct Peak {
  Vec2 position;
  double intensity = 0.0;
};

/// Local maxima (strictly above all 8 neighbours, at least `min_intensity`)
/// refined by a three-point Gaussian fit per axis. Border pixels are skipped.
std::vector<Peak> detect_peaks(const Image& image, double min_intensity);

struct Triangulation {
  Vec3 position;
  double error = 0.0;  // max over views of the reprojection distance, pixels
};

/// Least-squares intersection of the lines of sight through `pixels`, one
/// per camera. Polynomial cameras are linearized around `linearization`.
/// Returns nullopt if the Gauss-Newton refinement diverges.
std::optional<Triangulation> triangulate_point(std::span<const Vec2> pixels,
                                               std::span<const Camera> cameras,
                                               const Vec3& linearization = Vec3::Zero());

struct Candidate {
  Vec3 position;
  double intensity = 0.0;
  double error = 0.0;
};

struct ProposalOptions {
  double epsilon = 0.8;
  double min_intensity = 0.1;
  int max_combinations = 64;
  double duplicate_radius = 0.5;
};

/// Detect-and-triangulate proposal generator. Camera 0 is the reference: each
/// of its peaks is matched against peaks along the epipolar segments of its
/// line of sight in the other views, and every combination that triangulates
/// with reprojection error <= epsilon in all views becomes a candidate.
/// Candidates within `duplicate_radius` of an existing particle are dropped.
std::vector<Candidate> propose(std::span<const Image> residuals, std::span<const Camera> cameras,
                               const Box& volume, const ProposalOptions& options,
                               std::span<const Particle> existing = {});

}  // namespace jointpiv
