#include "jointpiv/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "jointpiv/error.hpp"

namespace jointpiv::io {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written assuming a little-endian host");

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::io, what + ": " + e.what());
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) raise(ErrorCode::io, what + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(ErrorCode::io, what + ": bad value for '" + key + "': " + e.what());
  }
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode);
  require(out.good(), ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  require(in.good(), ErrorCode::io, "cannot open '" + path.string() + "'");
  return in;
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double to_number(const std::string& s, const fs::path& path, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  std::size_t rest = used;
  while (rest < s.size() && std::isspace(static_cast<unsigned char>(s[rest]))) ++rest;
  require(used > 0 && rest == s.size(), ErrorCode::io,
          path.string() + ":" + std::to_string(line) + ": '" + s + "' is not a number");
  return v;
}

fs::path sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

json box_json(const Box& b) {
  return {{"lo", {b.lo.x(), b.lo.y(), b.lo.z()}}, {"hi", {b.hi.x(), b.hi.y(), b.hi.z()}}};
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
}

std::string camera_to_json(const Camera& camera) {
  json j;
  std::vector<double> coeffs;
  if (const auto* pin = std::get_if<PinholeCamera>(&camera)) {
    j["model"] = "pinhole";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) coeffs.push_back(pin->matrix()(r, c));
    }
  } else {
    j["model"] = "polynomial";
    for (const Vec2& a : std::get<PolynomialCamera>(camera).coefficients()) {
      coeffs.push_back(a.x());
      coeffs.push_back(a.y());
    }
  }
  j["coefficients"] = coeffs;
  return j.dump(2) + "\n";
}

Camera camera_from_json(const std::string& text) {
  const json j = parse_json(text, "camera");
  const auto model = get<std::string>(j, "model", "camera");
  const auto coeffs = get<std::vector<double>>(j, "coefficients", "camera");
  if (model == "pinhole") {
    require(coeffs.size() == 12, ErrorCode::io, "pinhole camera needs 12 coefficients");
    Mat34 m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = coeffs[4 * r + c];
    }
    return PinholeCamera(m);
  }
  if (model == "polynomial") {
    require(coeffs.size() == 2 * PolynomialCamera::kTerms, ErrorCode::io,
            "polynomial camera needs 38 coefficients");
    PolynomialCamera::Coefficients a;
    for (int t = 0; t < PolynomialCamera::kTerms; ++t) a[t] = {coeffs[2 * t], coeffs[2 * t + 1]};
    return PolynomialCamera(a);
  }
  raise(ErrorCode::io, "unknown camera model '" + model + "'");
}

void write_camera(const fs::path& path, const Camera& camera) {
  write_text(path, camera_to_json(camera));
}

Camera read_camera(const fs::path& path) { return camera_from_json(read_text(path)); }

// PFM stores rows bottom to top; a negative scale marks little-endian data.
void write_pfm(const fs::path& path, const Image& image) {
  std::ofstream out = open_out(path, std::ios::binary);
  out << "Pf\n" << image.width() << " " << image.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(image.width()));
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) row[x] = static_cast<float>(image(x, y));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
}

Image read_pfm(const fs::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  require(in.good() && magic == "Pf" && width > 0 && height > 0, ErrorCode::io,
          "'" + path.string() + "' is not a grayscale PFM file");
  require(scale < 0.0, ErrorCode::io, "'" + path.string() + "': big-endian PFM not supported");
  in.get();
  Image image(width, height);
  std::vector<float> row(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    require(in.good(), ErrorCode::io, "'" + path.string() + "': truncated pixel data");
    for (int x = 0; x < width; ++x) image(x, y) = row[x];
  }
  return image;
}

void write_pgm16(const fs::path& path, const Image& image) {
  double peak = 0.0;
  for (double v : image.pixels()) peak = std::max(peak, v);
  const double scale = peak > 0.0 ? peak / 65535.0 : 1.0;
  std::ofstream out = open_out(path, std::ios::binary);
  out << "P5\n" << image.width() << " " << image.height() << "\n65535\n";
  for (double v : image.pixels()) {
    const double level = std::clamp(std::round(v / scale), 0.0, 65535.0);
    const auto g = static_cast<std::uint16_t>(level);
    const unsigned char bytes[2] = {static_cast<unsigned char>(g >> 8),
                                    static_cast<unsigned char>(g & 0xFF)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
  write_text(sidecar(path), json{{"scale", scale}, {"maxval", 65535}}.dump(2) + "\n");
}

Image read_pgm16(const fs::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  require(in.good() && magic == "P5" && width > 0 && height > 0 && maxval > 255 &&
              maxval <= 65535,
          ErrorCode::io, "'" + path.string() + "' is not a 16-bit PGM file");
  in.get();
  double scale = 1.0;
  if (fs::exists(sidecar(path))) {
    scale = get<double>(parse_json(read_text(sidecar(path)), "pgm sidecar"), "scale",
                        "pgm sidecar");
  }
  Image image(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      unsigned char bytes[2];
      in.read(reinterpret_cast<char*>(bytes), 2);
      require(in.good(), ErrorCode::io, "'" + path.string() + "': truncated pixel data");
      image(x, y) = scale * static_cast<double>((bytes[0] << 8) | bytes[1]);
    }
  }
  return image;
}

Image read_image(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".pgm") return read_pgm16(path);
  raise(ErrorCode::io, "unsupported image format '" + ext + "'");
}

void write_particles(const fs::path& path, std::span<const Particle> particles) {
  std::ofstream out = open_out(path);
  out << "x,y,z,c\n" << std::setprecision(17);
  for (const Particle& p : particles) {
    out << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ','
        << p.intensity << '\n';
  }
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
}

ParticleSet read_particles(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io,
          "'" + path.string() + "' is empty");
  require(line.rfind("x,y,z,c", 0) == 0, ErrorCode::io,
          "'" + path.string() + "': expected header x,y,z,c");
  ParticleSet out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() >= 4, ErrorCode::io,
            path.string() + ":" + std::to_string(n) + ": expected 4 fields");
    out.push_back({{to_number(f[0], path, n), to_number(f[1], path, n), to_number(f[2], path, n)},
                   to_number(f[3], path, n)});
  }
  return out;
}

void write_candidates(const fs::path& path, std::span<const Candidate> candidates) {
  std::ofstream out = open_out(path);
  out << "x,y,z,c,err\n" << std::setprecision(17);
  for (const Candidate& c : candidates) {
    out << c.position.x() << ',' << c.position.y() << ',' << c.position.z() << ','
        << c.intensity << ',' << c.error << '\n';
  }
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
}

void write_flow(const fs::path& path, const MotionGrid& grid) {
  const GridDims& d = grid.dims();
  const json header = {{"dims", {d.nx, d.ny, d.nz}},
                       {"spacing", grid.spacing()},
                       {"components", 3},
                       {"ordering", "x-fastest"},
                       {"dtype", "float32-le"}};
  std::ofstream out = open_out(path, std::ios::binary);
  out << header.dump() << '\n';
  std::vector<float> block(grid.coeffs().begin(), grid.coeffs().end());
  out.write(reinterpret_cast<const char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(float)));
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
}

MotionGrid read_flow(const fs::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io,
          "'" + path.string() + "' is empty");
  const json header = parse_json(line, "flow header of '" + path.string() + "'");
  const auto dims = get<std::vector<int>>(header, "dims", "flow header");
  const auto spacing = get<double>(header, "spacing", "flow header");
  require(dims.size() == 3 && dims[0] >= 2 && dims[1] >= 2 && dims[2] >= 2 && spacing > 0.0,
          ErrorCode::io, "'" + path.string() + "': invalid flow header");
  if (header.contains("ordering")) {
    require(header.at("ordering") == "x-fastest", ErrorCode::io,
            "'" + path.string() + "': unsupported ordering");
  }
  const GridDims d{dims[0], dims[1], dims[2]};
  std::vector<float> block(3 * d.vertex_count());
  in.read(reinterpret_cast<char*>(block.data()),
          static_cast<std::streamsize>(block.size() * sizeof(float)));
  require(in.gcount() == static_cast<std::streamsize>(block.size() * sizeof(float)),
          ErrorCode::io, "'" + path.string() + "': truncated coefficient block");
  return MotionGrid(d, spacing, std::vector<double>(block.begin(), block.end()));
}

void Manifest::validate() const {
  require(!cameras.empty(), ErrorCode::io, "manifest lists no cameras");
  require(images_t0.size() == cameras.size() && images_t1.size() == cameras.size(),
          ErrorCode::io, "manifest needs one image per camera and time step");
  require((volume.size().array() > 0.0).all(), ErrorCode::io, "manifest volume is empty");
  auto check = [](const fs::path& p) {
    require(fs::exists(p), ErrorCode::io, "manifest references missing file '" + p.string() + "'");
  };
  for (const auto& p : cameras) check(p);
  for (const auto& p : images_t0) check(p);
  for (const auto& p : images_t1) check(p);
  if (truth_particles) check(*truth_particles);
  if (truth_particles_t1) check(*truth_particles_t1);
  if (truth_flow) check(*truth_flow);
}

void write_manifest(const fs::path& path, const Manifest& m) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
  auto rel_all = [&](const std::vector<fs::path>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(rel(p));
    return out;
  };
  json j;
  j["cameras"] = rel_all(m.cameras);
  j["images"] = {{"t0", rel_all(m.images_t0)}, {"t1", rel_all(m.images_t1)}};
  j["volume"] = box_json(m.volume);
  j["sigma"] = m.sigma;
  if (!m.flow.empty()) j["flow"] = m.flow;
  if (m.ppp > 0.0) j["ppp"] = m.ppp;
  j["seed"] = m.seed;
  json truth = json::object();
  if (m.truth_particles) truth["particles_t0"] = rel(*m.truth_particles);
  if (m.truth_particles_t1) truth["particles_t1"] = rel(*m.truth_particles_t1);
  if (m.truth_flow) truth["flow"] = rel(*m.truth_flow);
  if (!truth.empty()) j["truth"] = truth;
  write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  const json j = parse_json(read_text(path), "manifest '" + path.string() + "'");
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto paths = [&](const json& arr) {
    std::vector<fs::path> out;
    for (const auto& s : arr) out.push_back(base / s.get<std::string>());
    return out;
  };
  Manifest m;
  try {
    m.cameras = paths(j.at("cameras"));
    m.images_t0 = paths(j.at("images").at("t0"));
    m.images_t1 = paths(j.at("images").at("t1"));
    const auto lo = j.at("volume").at("lo").get<std::vector<double>>();
    const auto hi = j.at("volume").at("hi").get<std::vector<double>>();
    require(lo.size() == 3 && hi.size() == 3, ErrorCode::io, "manifest volume needs 3D corners");
    m.volume = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    m.sigma = j.value("sigma", 1.0);
    m.flow = j.value("flow", std::string());
    m.ppp = j.value("ppp", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("truth")) {
      const json& t = j.at("truth");
      if (t.contains("particles_t0")) m.truth_particles = base / t.at("particles_t0").get<std::string>();
      if (t.contains("particles_t1")) m.truth_particles_t1 = base / t.at("particles_t1").get<std::string>();
      if (t.contains("flow")) m.truth_flow = base / t.at("flow").get<std::string>();
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::io, "manifest '" + path.string() + "': " + e.what());
  }
  m.validate();
  return m;
}

Dataset load_dataset(const Manifest& m) {
  m.validate();
  Dataset d;
  for (const auto& p : m.cameras) d.cameras.push_back(read_camera(p));
  for (const auto& p : m.images_t0) d.images.t0.push_back(read_image(p));
  for (const auto& p : m.images_t1) d.images.t1.push_back(read_image(p));
  d.images.validate();
  return d;
}

DivergenceMode parse_divergence(const std::string& text) {
  if (text == "hard") return DivergenceMode::hard();
  if (text.rfind("soft:", 0) == 0) {
    std::size_t used = 0;
    double alpha = -1.0;
    try {
      alpha = std::stod(text.substr(5), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used > 0 && used == text.size() - 5 && alpha >= 0.0, ErrorCode::invalid_argument,
            "divergence mode '" + text + "': expected soft:ALPHA with ALPHA >= 0");
    return DivergenceMode::soft(alpha);
  }
  raise(ErrorCode::invalid_argument, "divergence mode must be 'hard' or 'soft:ALPHA'");
}

SparsityNorm parse_norm(const std::string& text) {
  if (text == "l0" || text == "L0") return SparsityNorm::l0;
  if (text == "l1" || text == "L1") return SparsityNorm::l1;
  raise(ErrorCode::invalid_argument, "sparsity norm must be 'l0' or 'l1'");
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  require(colon != std::string::npos, ErrorCode::invalid_argument,
          "range '" + text + "': expected START:END");
  try {
    std::size_t a = 0;
    std::size_t b = 0;
    const double lo = std::stod(text.substr(0, colon), &a);
    const double hi = std::stod(text.substr(colon + 1), &b);
    if (a == colon && b == text.size() - colon - 1) return {lo, hi};
  } catch (const std::exception&) {
  }
  raise(ErrorCode::invalid_argument, "range '" + text + "': expected START:END");
}

std::string to_string(const DivergenceMode& mode) {
  return mode.is_hard() ? "hard" : "soft:" + format_double(mode.alpha);
}

std::string to_string(SparsityNorm norm) { return norm == SparsityNorm::l0 ? "l0" : "l1"; }

namespace {

json config_json(const SolverConfig& c) {
  return {{"lambda", c.lambda},
          {"mu", c.mu},
          {"eps", format_double(c.epsilon_start) + ":" + format_double(c.epsilon_end)},
          {"levels", c.pyramid_levels},
          {"factor", c.pyramid_factor},
          {"grid_subsample", c.grid_subsample},
          {"output_spacing", c.output_spacing},
          {"sigma", c.sigma},
          {"div", to_string(c.divergence)},
          {"norm", to_string(c.norm)},
          {"min_intensity", c.min_intensity},
          {"max_inner_iterations", c.max_inner_iterations},
          {"pcg_tolerance", c.pcg_tolerance},
          {"pcg_iterations", c.pcg_iterations},
          {"threads", c.threads}};
}

}  // namespace

std::string config_to_json(const SolverConfig& config) { return config_json(config).dump(2); }

SolverConfig config_from_json(const std::string& text, SolverConfig c) {
  const json j = parse_json(text, "config");
  require(j.is_object(), ErrorCode::io, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "mu") c.mu = v.get<double>();
      else if (key == "eps") std::tie(c.epsilon_start, c.epsilon_end) = parse_range(v.get<std::string>());
      else if (key == "levels") c.pyramid_levels = v.get<int>();
      else if (key == "factor") c.pyramid_factor = v.get<double>();
      else if (key == "grid_subsample") c.grid_subsample = v.get<double>();
      else if (key == "output_spacing") c.output_spacing = v.get<double>();
      else if (key == "sigma") c.sigma = v.get<double>();
      else if (key == "div") c.divergence = parse_divergence(v.get<std::string>());
      else if (key == "norm") c.norm = parse_norm(v.get<std::string>());
      else if (key == "min_intensity") c.min_intensity = v.get<double>();
      else if (key == "max_inner_iterations") c.max_inner_iterations = v.get<int>();
      else if (key == "pcg_tolerance") c.pcg_tolerance = v.get<double>();
      else if (key == "pcg_iterations") c.pcg_iterations = v.get<int>();
      else if (key == "threads") c.threads = v.get<int>();
      else raise(ErrorCode::io, "config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::io, std::string("config: ") + e.what());
  }
  return c;
}

void write_convergence(const fs::path& path, const RunReport& report) {
  std::ofstream out = open_out(path);
  out << "iteration,energy,L_p,L_c,L_u,backtracks\n" << std::setprecision(17);
  int global = 0;
  for (const LevelReport& level : report.levels) {
    for (const IterationRecord& r : level.convergence.iterations) {
      out << global++ << ',' << r.energy << ',' << r.lipschitz[0] << ',' << r.lipschitz[1] << ','
          << r.lipschitz[2] << ',' << r.backtracks << '\n';
    }
  }
  require(out.good(), ErrorCode::io, "failed writing '" + path.string() + "'");
}

void write_run_report(const fs::path& path, const RunReport& report, const SolverConfig& config,
                      const std::string& extra_json) {
  json levels = json::array();
  for (const LevelReport& l : report.levels) {
    levels.push_back({{"level", l.level},
                      {"sigma", l.sigma},
                      {"spacing", l.spacing},
                      {"dims", {l.dims.nx, l.dims.ny, l.dims.nz}},
                      {"epsilon", l.epsilon},
                      {"proposed", l.proposed},
                      {"pruned", l.pruned},
                      {"particles", l.particles},
                      {"energy", l.energy},
                      {"iterations", l.convergence.iterations.size()},
                      {"converged", l.convergence.converged},
                      {"backtracks", l.convergence.total_backtracks},
                      {"pcg_iterations", l.pressure.iterations},
                      {"pcg_residual", l.pressure.relative_residual}});
  }
  json j = {{"mode", report.mode},
            {"no_particles", report.no_particles},
            {"seconds", report.seconds},
            {"max_divergence", report.max_divergence},
            {"final_projection",
             {{"iterations", report.final_projection.iterations},
              {"relative_residual", report.final_projection.relative_residual},
              {"converged", report.final_projection.converged}}},
            {"levels", levels},
            {"config", config_json(config)}};
  const json extra = parse_json(extra_json, "report extra");
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace jointpiv::io
