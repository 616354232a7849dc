#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jointpiv/camera.hpp"
#include "jointpiv/image.hpp"
#include "jointpiv/motion_grid.hpp"
#include "jointpiv/pipeline.hpp"
#include "jointpiv/scene.hpp"
#include "jointpiv/triangulate.hpp"

namespace jointpiv::io {

namespace fs = std::filesystem;

// Cameras: {"model": "pinhole" | "polynomial", "coefficients": [...]} with
// the 3x4 matrix row-major (12 numbers) or the 19 monomial coefficient pairs
// (u, v) in monomial order (38 numbers).
std::string camera_to_json(const Camera& camera);
Camera camera_from_json(const std::string& text);
void write_camera(const fs::path& path, const Camera& camera);
Camera read_camera(const fs::path& path);

// Images.
void write_pfm(const fs::path& path, const Image& image);
Image read_pfm(const fs::path& path);
/// 16-bit binary PGM, values scaled linearly to the full range. The scale
/// (image value per gray level) is stored in `<path>.json`.
void write_pgm16(const fs::path& path, const Image& image);
Image read_pgm16(const fs::path& path);
/// Dispatches on the extension (.pfm or .pgm).
Image read_image(const fs::path& path);

// Particles: CSV with header "x,y,z,c".
void write_particles(const fs::path& path, std::span<const Particle> particles);
ParticleSet read_particles(const fs::path& path);
// Candidate dumps: CSV with header "x,y,z,c,err".
void write_candidates(const fs::path& path, std::span<const Candidate> candidates);

// Flow volume: one header line of JSON with dims, spacing and ordering
// "x-fastest", then the interleaved coefficients as little-endian float32.
void write_flow(const fs::path& path, const MotionGrid& grid);
MotionGrid read_flow(const fs::path& path);

/// Paths are stored relative to the manifest's directory and returned
/// resolved.
struct Manifest {
  std::vector<fs::path> cameras;
  std::vector<fs::path> images_t0;
  std::vector<fs::path> images_t1;
  Box volume;
  double sigma = 1.0;
  std::optional<fs::path> truth_particles;
  std::optional<fs::path> truth_particles_t1;
  std::optional<fs::path> truth_flow;
  std::string flow;  // description of the generating flow, informational
  double ppp = 0.0;
  std::uint64_t seed = 0;

  /// Every referenced file exists and the per-camera lists agree in length.
  void validate() const;
};

void write_manifest(const fs::path& path, const Manifest& manifest);
Manifest read_manifest(const fs::path& path);

struct Dataset {
  std::vector<Camera> cameras;
  ImageSet images;
};
Dataset load_dataset(const Manifest& manifest);

// Solver configuration as a flat JSON object. Keys: lambda, mu, eps
// ("start:end"), levels, factor, grid_subsample, output_spacing, sigma, div
// ("hard" or "soft:ALPHA"), norm ("l0" or "l1"), min_intensity,
// max_inner_iterations, pcg_tolerance, pcg_iterations, threads.
std::string config_to_json(const SolverConfig& config);
/// Applies the keys present in `text` on top of `base`; unknown keys throw.
SolverConfig config_from_json(const std::string& text, SolverConfig base = {});

DivergenceMode parse_divergence(const std::string& text);
SparsityNorm parse_norm(const std::string& text);
std::pair<double, double> parse_range(const std::string& text);
std::string to_string(const DivergenceMode& mode);
std::string to_string(SparsityNorm norm);

/// Convergence trace across all levels, columns
/// iteration,energy,L_p,L_c,L_u,backtracks.
void write_convergence(const fs::path& path, const RunReport& report);
/// Summary JSON with per-level statistics and the configuration echo.
void write_run_report(const fs::path& path, const RunReport& report, const SolverConfig& config,
                      const std::string& extra_json = "{}");

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace jointpiv::io
