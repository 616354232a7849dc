#include "jointpiv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "jointpiv/error.hpp"
#include "jointpiv/triangulate.hpp"

namespace jointpiv {

void SolverConfig::validate() const {
  require(pyramid_levels >= 1, ErrorCode::invalid_argument, "pyramid levels must be at least 1");
  require(pyramid_factor > 0.0 && pyramid_factor < 1.0, ErrorCode::invalid_argument,
          "pyramid factor must lie in (0, 1)");
  require(sigma > 0.0, ErrorCode::invalid_argument, "blob sigma must be positive");
  require(grid_subsample > 0.0, ErrorCode::invalid_argument, "grid subsample must be positive");
  require(output_spacing >= 0.0, ErrorCode::invalid_argument, "output spacing must be >= 0");
  require(lambda >= 0.0 && mu >= 0.0, ErrorCode::invalid_argument,
          "lambda and mu must be nonnegative");
  require(epsilon_start > 0.0 && epsilon_start <= epsilon_end, ErrorCode::invalid_argument,
          "epsilon schedule must satisfy 0 < start <= end");
  require(min_intensity > 0.0, ErrorCode::invalid_argument, "minimum intensity must be positive");
  require(divergence.is_hard() || divergence.alpha >= 0.0, ErrorCode::invalid_argument,
          "soft divergence weight must be nonnegative");
  require(max_inner_iterations >= 1, ErrorCode::invalid_argument,
          "inner iterations must be at least 1");
  require(pcg_tolerance > 0.0 && pcg_iterations >= 1 && final_pcg_tolerance > 0.0 &&
              final_pcg_iterations >= 1,
          ErrorCode::invalid_argument, "invalid pressure solver settings");
  require(max_combinations >= 1, ErrorCode::invalid_argument,
          "max combinations must be at least 1");
  require(merge_radius >= 0.0, ErrorCode::invalid_argument, "merge radius must be >= 0");
}

double SolverConfig::level_sigma(int level) const {
  return std::max(sigma, sigma * std::pow(pyramid_factor, -(pyramid_levels - 1 - level)));
}

double SolverConfig::level_spacing(int level) const {
  return grid_subsample * std::pow(pyramid_factor, -(pyramid_levels - 1 - level));
}

double SolverConfig::level_epsilon(int level) const {
  if (pyramid_levels == 1) return epsilon_start;
  const double s = static_cast<double>(level) / (pyramid_levels - 1);
  return epsilon_start + s * (epsilon_end - epsilon_start);
}

namespace {

class EnergyObjective final : public SmoothObjective {
 public:
  explicit EnergyObjective(SmoothEnergy& energy) : energy_(energy) {}

  void evaluate(const BlockVectors& z, Evaluation& out) override {
    energy_.evaluate(z[0], z[1], z[2], result_);
    out.value = result_.value;
    std::swap(out.gradient[0], result_.grad_p);
    std::swap(out.gradient[1], result_.grad_c);
    std::swap(out.gradient[2], result_.grad_u);
  }

 private:
  SmoothEnergy& energy_;
  SmoothEnergy::Result result_;
};

struct Stage {
  bool propose = true;
  std::array<bool, 3> active{true, true, true};
  DataTermOptions data;
};

GridDims level_dims(const Box& volume, double spacing) {
  GridDims d = MotionGrid::covering(volume, spacing).dims();
  d.nx = std::max(d.nx, 4);
  d.ny = std::max(d.ny, 4);
  d.nz = std::max(d.nz, 4);
  return d;
}

ImageSet blur_to(const ImageSet& images, double from, double to) {
  if (to <= from) return images;
  ImageSet out;
  for (const Image& im : images.t0) out.t0.push_back(rescale_blobs(im, from, to));
  for (const Image& im : images.t1) out.t1.push_back(rescale_blobs(im, from, to));
  return out;
}

std::vector<Image> first_frame_residuals(const ImageSet& images, std::span<const Camera> cameras,
                                         std::span<const Particle> particles, double sigma) {
  const BlobKernel kernel(sigma);
  std::vector<Image> out;
  out.reserve(cameras.size());
  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const Image& obs = images.t0[k];
    if (particles.empty()) {
      out.push_back(obs);
    } else {
      out.push_back(
          residual(obs, render(particles, cameras[k], kernel, obs.width(), obs.height())));
    }
  }
  return out;
}

void check_inputs(const ImageSet& images, std::span<const Camera> cameras, const Box& volume,
                  const SolverConfig& config) {
  config.validate();
  images.validate();
  require(cameras.size() >= 2, ErrorCode::invalid_argument,
          "reconstruction needs at least two cameras");
  require(images.camera_count() == cameras.size(), ErrorCode::dimension_mismatch,
          "image set and camera list differ in length");
  require(!images.t1.empty(), ErrorCode::invalid_argument, "two time steps are required");
  require((volume.lo.array() >= 0.0).all() && (volume.size().array() > 0.0).all(),
          ErrorCode::invalid_argument, "volume must be nonempty and start at the origin octant");
}

void run_levels(const ImageSet& images, std::span<const Camera> cameras, const Box& volume,
                const SolverConfig& config, const Stage& stage, ParticleSet& particles,
                MotionGrid& flow, RunReport& report) {
  const std::vector<Camera> rig(cameras.begin(), cameras.end());
  std::array<double, 3> lipschitz{1.0, 1.0, 1.0};
  bool have_flow = false;

  for (int level = 0; level < config.pyramid_levels; ++level) {
    LevelReport lr;
    lr.level = level;
    lr.sigma = config.level_sigma(level);
    lr.spacing = config.level_spacing(level);
    lr.dims = level_dims(volume, lr.spacing);
    lr.epsilon = config.level_epsilon(level);

    flow = have_flow ? prolongate(flow, lr.dims, lr.spacing) : MotionGrid(lr.dims, lr.spacing);
    have_flow = true;

    PoissonSolver solver(lr.dims, config.pcg_tolerance, config.pcg_iterations);
    if (config.divergence.is_hard() && stage.active[2]) {
      solver.project(flow.coeffs());
      lr.pressure = solver.last_result();
    }

    if (stage.propose) {
      ProposalOptions po;
      po.epsilon = lr.epsilon;
      po.min_intensity = config.min_intensity;
      po.max_combinations = config.max_combinations;
      const std::vector<Image> res =
          first_frame_residuals(images, cameras, particles, config.sigma);
      const std::vector<Candidate> found = propose(res, cameras, volume, po, particles);
      lr.proposed = found.size();
      for (const Candidate& c : found) particles.push_back({c.position, c.intensity});
    }

    if (!particles.empty()) {
      EnergyParams params;
      params.lambda = config.lambda;
      params.mu = config.mu;
      params.norm = config.norm;
      params.divergence = config.divergence;
      params.sigma = lr.sigma;
      SmoothEnergy energy(rig, blur_to(images, config.sigma, lr.sigma), lr.dims, lr.spacing,
                          params, stage.data);
      EnergyObjective objective(energy);

      ProxSet prox;
      const double mu = config.mu;
      const SparsityNorm norm = config.norm;
      prox[1].apply = [mu, norm](std::span<double> c, double L) {
        prox_intensity(c, L, mu, norm);
      };
      prox[1].value = [mu, norm](std::span<const double> c) {
        return mu * sparsity_term(c, norm);
      };
      if (config.divergence.is_hard()) {
        prox[2].apply = [&solver](std::span<double> u, double) { solver.project(u); };
      }

      IpalmOptions opts;
      opts.max_iterations = config.max_inner_iterations;
      opts.tolerance = config.inner_tolerance;
      opts.active = stage.active;

      BlockVectors z;
      stack_particles(particles, z[0], z[1]);
      z[2] = flow.values();
      BlockState state = BlockState::start(std::move(z));
      state.lipschitz = lipschitz;

      Ipalm ipalm(objective, prox, opts);
      lr.convergence = ipalm.run(state);
      lipschitz = state.lipschitz;
      if (!lr.convergence.iterations.empty()) {
        lr.energy = lr.convergence.iterations.back().energy;
      }
      if (config.divergence.is_hard() && stage.active[2]) lr.pressure = solver.last_result();

      flow = MotionGrid(lr.dims, lr.spacing, std::move(state.current[2]));
      const ParticleSet updated = unstack_particles(state.current[0], state.current[1]);
      particles = stage.active[0] || stage.active[1]
                      ? merge_close(prune_zero(updated), config.merge_radius)
                      : updated;
      lr.pruned = updated.size() - particles.size();
    }
    lr.particles = particles.size();
    report.levels.push_back(std::move(lr));
  }
}

void finish(const Box& volume, const SolverConfig& config, MotionGrid& flow, RunReport& report) {
  if (config.output_spacing > 0.0 && config.output_spacing != flow.spacing()) {
    flow = prolongate(flow, level_dims(volume, config.output_spacing), config.output_spacing);
  }
  if (config.divergence.is_hard()) {
    PoissonSolver solver(flow.dims(), config.final_pcg_tolerance, config.final_pcg_iterations);
    report.final_projection = solver.project(flow.coeffs());
  }
  const std::vector<double> div = DivergenceOperator(flow.dims()).apply(flow.coeffs());
  report.max_divergence = 0.0;
  for (double v : div) report.max_divergence = std::max(report.max_divergence, std::abs(v));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Reconstruction reconstruct(const ImageSet& images, std::span<const Camera> cameras,
                           const Box& volume, const SolverConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_inputs(images, cameras, volume, config);
  Reconstruction out;
  out.report.mode = "joint";
  run_levels(images, cameras, volume, config, Stage{}, out.particles, out.flow, out.report);
  out.report.no_particles = out.particles.empty();
  if (out.particles.empty()) {
    out.flow = MotionGrid(out.flow.dims(), out.flow.spacing());
  }
  finish(volume, config, out.flow, out.report);
  out.report.seconds = seconds_since(t0);
  return out;
}

Reconstruction reconstruct_sequential(const ImageSet& images, std::span<const Camera> cameras,
                                      const Box& volume, const SolverConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_inputs(images, cameras, volume, config);
  Reconstruction out;
  out.report.mode = "sequential";

  Stage particles_only;
  particles_only.active = {true, true, false};
  particles_only.data = {true, false};
  run_levels(images, cameras, volume, config, particles_only, out.particles, out.flow,
             out.report);

  Stage flow_only;
  flow_only.propose = false;
  flow_only.active = {false, false, true};
  run_levels(images, cameras, volume, config, flow_only, out.particles, out.flow, out.report);

  out.report.no_particles = out.particles.empty();
  finish(volume, config, out.flow, out.report);
  out.report.seconds = seconds_since(t0);
  return out;
}

Reconstruction reconstruct_flow(const ImageSet& images, std::span<const Camera> cameras,
                                const Box& volume, std::span<const Particle> particles,
                                const SolverConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_inputs(images, cameras, volume, config);
  Reconstruction out;
  out.report.mode = "flow";
  out.particles.assign(particles.begin(), particles.end());

  Stage flow_only;
  flow_only.propose = false;
  flow_only.active = {false, false, true};
  run_levels(images, cameras, volume, config, flow_only, out.particles, out.flow, out.report);

  out.report.no_particles = out.particles.empty();
  finish(volume, config, out.flow, out.report);
  out.report.seconds = seconds_since(t0);
  return out;
}

}  // namespace jointpiv
