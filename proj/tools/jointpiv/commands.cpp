#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "jointpiv/error.hpp"
#include "jointpiv/io.hpp"
#include "jointpiv/metrics.hpp"
#include "jointpiv/pipeline.hpp"
#include "jointpiv/synth.hpp"

namespace jointpiv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// "200x100x60" or "200,100,60".
std::vector<double> parse_dims(const std::string& text, std::size_t count, const char* what) {
  std::string s = text;
  for (char& ch : s) {
    if (ch == 'x' || ch == 'X') ch = ',';
  }
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used > 0 && used == item.size() && v > 0.0, ErrorCode::invalid_argument,
            std::string(what) + ": '" + text + "' is not a list of positive numbers");
    out.push_back(v);
  }
  require(out.size() == count, ErrorCode::invalid_argument,
          std::string(what) + ": expected " + std::to_string(count) + " values");
  return out;
}

void write_image(const fs::path& path, const Image& image) {
  if (path.extension() == ".pgm") {
    io::write_pgm16(path, image);
  } else {
    io::write_pfm(path, image);
  }
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string flow = "taylor_green:3";
  double ppp = 0.05;
  std::string size = "200x100x60";
  std::string image = "300x160";
  double sigma = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 1;
  double truth_spacing = 10.0;
  std::string format = "pfm";
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  const auto v = parse_dims(a.size, 3, "--size");
  const auto im = parse_dims(a.image, 2, "--image");
  SceneOptions so;
  so.ppp = a.ppp;
  so.volume = Box::from_size({v[0], v[1], v[2]});
  so.width = static_cast<int>(im[0]);
  so.height = static_cast<int>(im[1]);
  so.sigma = a.sigma;
  so.noise = a.noise;
  so.seed = a.seed;
  so.truth_spacing = a.truth_spacing;
  require(a.format == "pfm" || a.format == "pgm", ErrorCode::invalid_argument,
          "--format must be pfm or pgm");

  const AnalyticFlow flow = parse_flow(a.flow, so.volume);
  const SyntheticScene scene = generate(flow, so);

  const fs::path out(a.out);
  io::Manifest m;
  m.volume = scene.volume;
  m.sigma = scene.sigma;
  m.flow = a.flow;
  m.ppp = a.ppp;
  m.seed = a.seed;
  for (std::size_t k = 0; k < scene.cameras.size(); ++k) {
    const std::string tag = "cam" + std::to_string(k);
    const fs::path cam = out / "cameras" / (tag + ".json");
    const fs::path i0 = out / "images" / ("t0_" + tag + "." + a.format);
    const fs::path i1 = out / "images" / ("t1_" + tag + "." + a.format);
    io::write_camera(cam, scene.cameras[k]);
    write_image(i0, scene.images.t0[k]);
    write_image(i1, scene.images.t1[k]);
    m.cameras.push_back(cam);
    m.images_t0.push_back(i0);
    m.images_t1.push_back(i1);
  }
  m.truth_particles = out / "truth" / "particles_t0.csv";
  m.truth_particles_t1 = out / "truth" / "particles_t1.csv";
  m.truth_flow = out / "truth" / "flow.flow";
  io::write_particles(*m.truth_particles, scene.particles_t0);
  io::write_particles(*m.truth_particles_t1, scene.particles_t1);
  io::write_flow(*m.truth_flow, scene.truth_flow);
  io::write_manifest(out / "manifest.json", m);

  std::cout << "generated " << scene.particles_t0.size() << " particles, "
            << scene.cameras.size() << " cameras -> " << (out / "manifest.json").string() << "\n";
  return success;
}

// ------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string manifest;
  std::string out;
  std::string config_file;
  double lambda = 0.0;
  double mu = 0.0;
  std::string eps;
  int levels = 0;
  double factor = 0.0;
  double grid_subsample = 0.0;
  double output_spacing = 0.0;
  std::string div;
  std::string norm;
  double min_intensity = 0.0;
  int iterations = 0;
  int threads = 0;
  bool sequential = false;
  CLI::App* cmd = nullptr;
};

bool given(const CLI::App* cmd, const char* name) { return cmd->count(name) > 0; }

SolverConfig resolve_config(const ReconstructArgs& a, double manifest_sigma) {
  SolverConfig c;
  c.sigma = manifest_sigma;
  if (!a.config_file.empty()) c = io::config_from_json(io::read_text(a.config_file), c);
  const CLI::App* cmd = a.cmd;
  if (given(cmd, "--lambda")) c.lambda = a.lambda;
  if (given(cmd, "--mu")) c.mu = a.mu;
  if (given(cmd, "--eps")) std::tie(c.epsilon_start, c.epsilon_end) = io::parse_range(a.eps);
  if (given(cmd, "--levels")) c.pyramid_levels = a.levels;
  if (given(cmd, "--factor")) c.pyramid_factor = a.factor;
  if (given(cmd, "--grid-subsample")) c.grid_subsample = a.grid_subsample;
  if (given(cmd, "--output-spacing")) c.output_spacing = a.output_spacing;
  if (given(cmd, "--div")) c.divergence = io::parse_divergence(a.div);
  if (given(cmd, "--norm")) c.norm = io::parse_norm(a.norm);
  if (given(cmd, "--min-intensity")) c.min_intensity = a.min_intensity;
  if (given(cmd, "--iterations")) c.max_inner_iterations = a.iterations;
  if (given(cmd, "--threads")) c.threads = a.threads;
  c.validate();
  return c;
}

int run_reconstruct(const ReconstructArgs& a) {
  const io::Manifest manifest = io::read_manifest(a.manifest);
  const io::Dataset data = io::load_dataset(manifest);
  const SolverConfig config = resolve_config(a, manifest.sigma);

  const Reconstruction r =
      a.sequential ? reconstruct_sequential(data.images, data.cameras, manifest.volume, config)
                   : reconstruct(data.images, data.cameras, manifest.volume, config);

  const fs::path out(a.out);
  io::write_particles(out / "particles.csv", r.particles);
  io::write_flow(out / "flow.flow", r.flow);
  io::write_convergence(out / "convergence.csv", r.report);
  const json extra = {{"manifest", fs::absolute(a.manifest).string()},
                      {"sequential", a.sequential},
                      {"particles", r.particles.size()}};
  io::write_run_report(out / "report.json", r.report, config, extra.dump());

  if (r.report.no_particles) {
    std::cerr << "warning: no particles were reconstructed; the flow is zero\n";
  }
  std::cout << r.report.mode << " reconstruction: " << r.particles.size() << " particles, flow "
            << r.flow.dims().nx << "x" << r.flow.dims().ny << "x" << r.flow.dims().nz
            << " vertices, max |div| " << r.report.max_divergence << ", " << std::fixed
            << std::setprecision(1) << r.report.seconds << " s\n";
  return success;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string manifest;
  std::string result;
  std::string flow;
  std::string particles;
  std::string truth_flow;
  std::string truth_particles;
  double threshold = 1.0;
  std::string out;
};

int run_evaluate(EvaluateArgs a) {
  if (!a.manifest.empty()) {
    const io::Manifest m = io::read_manifest(a.manifest);
    if (a.truth_flow.empty() && m.truth_flow) a.truth_flow = m.truth_flow->string();
    if (a.truth_particles.empty() && m.truth_particles) {
      a.truth_particles = m.truth_particles->string();
    }
  }
  if (!a.result.empty()) {
    if (a.flow.empty()) a.flow = (fs::path(a.result) / "flow.flow").string();
    if (a.particles.empty()) a.particles = (fs::path(a.result) / "particles.csv").string();
  }
  require(!a.flow.empty() && !a.truth_flow.empty(), ErrorCode::invalid_argument,
          "evaluate: need an estimated and a true flow (--flow/--result and --truth-flow/--manifest)");
  require(!a.particles.empty() && !a.truth_particles.empty(), ErrorCode::invalid_argument,
          "evaluate: need estimated and true particles");

  const MotionGrid est = io::read_flow(a.flow);
  const MotionGrid truth = io::read_flow(a.truth_flow);
  const FlowMetrics fm = flow_metrics(est, truth);
  const ParticleSet pe = io::read_particles(a.particles);
  const ParticleSet pt = io::read_particles(a.truth_particles);
  const ParticleMetrics pm = particle_metrics(pe, pt, a.threshold);

  const json j = {{"aee", fm.aee},
                  {"aae", fm.aae},
                  {"aad", fm.aad},
                  {"precision", pm.precision},
                  {"recall", pm.recall},
                  {"matched", pm.matched},
                  {"estimated_particles", pe.size()},
                  {"true_particles", pt.size()},
                  {"threshold", pm.threshold}};

  std::cout << std::left << std::setw(12) << "metric" << "value\n"
            << std::setw(12) << "AEE" << fm.aee << "\n"
            << std::setw(12) << "AAE" << fm.aae << "\n"
            << std::setw(12) << "AAD" << fm.aad << "\n"
            << std::setw(12) << "precision" << pm.precision << "\n"
            << std::setw(12) << "recall" << pm.recall << "\n";
  if (!a.out.empty()) io::write_text(a.out, j.dump(2) + "\n");
  return success;
}

// ------------------------------------------------------------------ export

struct ExportArgs {
  std::string flow;
  std::string slice = "z=0";
  std::string component = "mag";
  std::string out;
  int vectors = 0;
  std::string vectors_out;
};

int run_export(const ExportArgs& a) {
  const MotionGrid grid = io::read_flow(a.flow);
  const GridDims& d = grid.dims();

  const auto eq = a.slice.find('=');
  require(eq == 1 && (a.slice[0] == 'x' || a.slice[0] == 'y' || a.slice[0] == 'z'),
          ErrorCode::invalid_argument, "--slice must look like z=K (or x=K, y=K)");
  const int axis = a.slice[0] - 'x';
  int index = -1;
  try {
    std::size_t used = 0;
    index = std::stoi(a.slice.substr(2), &used);
    if (used != a.slice.size() - 2) index = -1;
  } catch (const std::exception&) {
    index = -1;
  }
  const int extent[3] = {d.nx, d.ny, d.nz};
  require(index >= 0 && index < extent[axis], ErrorCode::invalid_argument,
          "slice index out of range: " + a.slice + " (axis has " + std::to_string(extent[axis]) +
              " vertices)");

  int comp = -1;
  if (a.component == "x") comp = 0;
  else if (a.component == "y") comp = 1;
  else if (a.component == "z") comp = 2;
  else if (a.component != "mag") raise(ErrorCode::invalid_argument, "--component must be x, y, z or mag");

  // Image axes are the two remaining grid axes in x, y, z order.
  const int ua = axis == 0 ? 1 : 0;
  const int va = axis == 2 ? 1 : 2;
  Image image(extent[ua], extent[va]);
  for (int v = 0; v < extent[va]; ++v) {
    for (int u = 0; u < extent[ua]; ++u) {
      int ijk[3];
      ijk[axis] = index;
      ijk[ua] = u;
      ijk[va] = v;
      const Vec3 w = grid.at(ijk[0], ijk[1], ijk[2]);
      image(u, v) = comp < 0 ? w.norm() : w[comp];
    }
  }
  write_image(a.out, image);

  if (a.vectors > 0) {
    require(!a.vectors_out.empty(), ErrorCode::invalid_argument,
            "--vectors needs --vectors-out");
    std::ostringstream os;
    os << "x,y,z,u,v,w\n" << std::setprecision(9);
    for (int k = 0; k < d.nz; k += a.vectors) {
      for (int j = 0; j < d.ny; j += a.vectors) {
        for (int i = 0; i < d.nx; i += a.vectors) {
          const Vec3 p = grid.position(i, j, k);
          const Vec3 w = grid.at(i, j, k);
          os << p.x() << ',' << p.y() << ',' << p.z() << ',' << w.x() << ',' << w.y() << ','
             << w.z() << '\n';
        }
      }
    }
    io::write_text(a.vectors_out, os.str());
  }
  std::cout << "wrote " << a.out << " (" << image.width() << "x" << image.height() << ")\n";
  return success;
}

}  // namespace

void register_commands(CLI::App& app, int& status) {
  {
    auto args = std::make_shared<GenerateArgs>();
    CLI::App* cmd = app.add_subcommand("generate", "Render a synthetic two-frame dataset");
    cmd->add_option("--flow", args->flow,
                    "uniform:dx,dy,dz | rotation:wx,wy,wz | shear:normal,flow,rate | "
                    "taylor_green:max_speed | taylor_green:ax,ay,az,kx,ky,kz")
        ->capture_default_str();
    cmd->add_option("--ppp", args->ppp, "Particles per pixel of one camera")->capture_default_str();
    cmd->add_option("--size", args->size, "Volume size in voxels, XxYxZ")->capture_default_str();
    cmd->add_option("--image", args->image, "Image size in pixels, WxH")->capture_default_str();
    cmd->add_option("--sigma", args->sigma, "Blob standard deviation in pixels")
        ->capture_default_str();
    cmd->add_option("--noise", args->noise, "Std. deviation of additive pixel noise")
        ->capture_default_str();
    cmd->add_option("--seed", args->seed, "Random seed")->capture_default_str();
    cmd->add_option("--truth-spacing", args->truth_spacing, "Vertex spacing of the true flow grid")
        ->capture_default_str();
    cmd->add_option("--format", args->format, "Image format: pfm or pgm")->capture_default_str();
    cmd->add_option("--out", args->out, "Output directory")->required();
    cmd->callback([args, &status] { status = run_generate(*args); });
  }
  {
    auto args = std::make_shared<ReconstructArgs>();
    CLI::App* cmd = app.add_subcommand(
        "reconstruct",
        "Estimate particles and flow from a dataset manifest. Precedence: flags, then --config, "
        "then defaults. Config keys: lambda, mu, eps, levels, factor, grid_subsample, "
        "output_spacing, sigma, div, norm, min_intensity, max_inner_iterations, pcg_tolerance, "
        "pcg_iterations, threads");
    args->cmd = cmd;
    cmd->add_option("manifest", args->manifest, "Dataset manifest JSON")->required();
    cmd->add_option("--out", args->out, "Output directory")->required();
    cmd->add_option("--config", args->config_file, "Flat JSON configuration file");
    cmd->add_option("--lambda", args->lambda, "Smoothness weight (default 0.04)");
    cmd->add_option("--mu", args->mu, "Sparsity weight (default 1e-4)");
    cmd->add_option("--eps", args->eps, "Triangulation tolerance schedule START:END (default 0.8:2.0)");
    cmd->add_option("--levels", args->levels, "Pyramid levels (default 10)");
    cmd->add_option("--factor", args->factor, "Pyramid factor (default 0.94)");
    cmd->add_option("--grid-subsample", args->grid_subsample,
                    "Flow lattice spacing in voxels at the finest level (default 10)");
    cmd->add_option("--output-spacing", args->output_spacing,
                    "Resample the delivered flow to this spacing (default: finest lattice)");
    cmd->add_option("--div", args->div, "hard | soft:ALPHA (default hard)");
    cmd->add_option("--norm", args->norm, "l0 | l1 (default l0)");
    cmd->add_option("--min-intensity", args->min_intensity, "Peak threshold (default 0.1)");
    cmd->add_option("--iterations", args->iterations, "Optimizer iterations per level (default 40)");
    cmd->add_option("--threads", args->threads, "Worker threads (recorded; runs single-threaded)");
    cmd->add_flag("--sequential", args->sequential,
                  "Reconstruct particles from the first frame, then the flow");
    cmd->callback([args, &status] { status = run_reconstruct(*args); });
  }
  {
    auto args = std::make_shared<EvaluateArgs>();
    CLI::App* cmd = app.add_subcommand("evaluate", "Compare a reconstruction with ground truth");
    cmd->add_option("--manifest", args->manifest, "Manifest with truth references");
    cmd->add_option("--result", args->result, "Directory written by reconstruct");
    cmd->add_option("--flow", args->flow, "Estimated flow volume");
    cmd->add_option("--particles", args->particles, "Estimated particles CSV");
    cmd->add_option("--truth-flow", args->truth_flow, "True flow volume");
    cmd->add_option("--truth-particles", args->truth_particles, "True particles CSV");
    cmd->add_option("--threshold", args->threshold, "Match distance in voxels")
        ->capture_default_str();
    cmd->add_option("--out", args->out, "Write the metrics as JSON");
    cmd->callback([args, &status] { status = run_evaluate(*args); });
  }
  {
    auto args = std::make_shared<ExportArgs>();
    CLI::App* cmd = app.add_subcommand("export", "Write a flow slice as an image");
    cmd->add_option("flow", args->flow, "Flow volume")->required();
    cmd->add_option("--slice", args->slice, "Slice, e.g. z=3")->capture_default_str();
    cmd->add_option("--component", args->component, "x | y | z | mag")->capture_default_str();
    cmd->add_option("--out", args->out, "Output image (.pfm or .pgm)")->required();
    cmd->add_option("--vectors", args->vectors, "Also dump every N-th vertex as CSV");
    cmd->add_option("--vectors-out", args->vectors_out, "CSV path for --vectors");
    cmd->callback([args, &status] { status = run_export(*args); });
  }
}

}  // namespace jointpiv::cli
