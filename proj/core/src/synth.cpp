#include "jointpiv/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "jointpiv/error.hpp"

namespace jointpiv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      raise(ErrorCode::invalid_argument, "flow spec: '" + item + "' is not a number");
    }
    require(used == item.size(), ErrorCode::invalid_argument,
            "flow spec: '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

}  // namespace

TaylorGreen TaylorGreen::for_volume(const Box& volume, double max_speed) {
  const Vec3 size = volume.size();
  const double pi = std::numbers::pi;
  TaylorGreen tg;
  tg.wavenumber = {2.0 * pi / size.x(), 2.0 * pi / size.y(), pi / size.z()};
  tg.phase = {-tg.wavenumber.x() * volume.lo.x(), -tg.wavenumber.y() * volume.lo.y(),
              -tg.wavenumber.z() * volume.lo.z()};
  const double kx = tg.wavenumber.x();
  const double ky = tg.wavenumber.y();
  const double scale = max_speed / std::max(kx, ky);
  tg.amplitude = {scale * ky, -scale * kx, 0.0};
  return tg;
}

Vec3 velocity(const AnalyticFlow& flow, const Vec3& x) {
  return std::visit(
      overloaded{
          [&](const UniformFlow& f) -> Vec3 { return f.displacement; },
          [&](const RigidRotation& f) -> Vec3 {
            return f.omega * f.axis.normalized().cross(x - f.center);
          },
          [&](const TaylorGreen& f) -> Vec3 {
            const Vec3 a = f.wavenumber.cwiseProduct(x) + f.phase;
            const double sx = std::sin(a.x()), cx = std::cos(a.x());
            const double sy = std::sin(a.y()), cy = std::cos(a.y());
            const double sz = std::sin(a.z()), cz = std::cos(a.z());
            return {f.amplitude.x() * cx * sy * sz, f.amplitude.y() * sx * cy * sz,
                    f.amplitude.z() * sx * sy * cz};
          },
          [&](const ShearFlow& f) -> Vec3 {
            Vec3 u = Vec3::Zero();
            u[f.flow_axis] = f.rate * (x[f.normal_axis] - f.offset);
            return u;
          }},
      flow);
}

double divergence(const AnalyticFlow& flow, const Vec3& x) {
  return std::visit(
      overloaded{
          [&](const UniformFlow&) { return 0.0; },
          // omega x r has a zero trace Jacobian: the cross-product matrix is skew.
          [&](const RigidRotation&) { return 0.0; },
          [&](const TaylorGreen& f) {
            const Vec3 a = f.wavenumber.cwiseProduct(x) + f.phase;
            const double s = std::sin(a.x()) * std::sin(a.y()) * std::sin(a.z());
            return -f.amplitude.x() * f.wavenumber.x() * s -
                   f.amplitude.y() * f.wavenumber.y() * s -
                   f.amplitude.z() * f.wavenumber.z() * s;
          },
          [&](const ShearFlow& f) { return f.flow_axis == f.normal_axis ? f.rate : 0.0; }},
      flow);
}

void validate(const AnalyticFlow& flow) {
  std::visit(overloaded{[](const UniformFlow&) {},
                        [](const RigidRotation& f) {
                          require(f.axis.norm() > 0.0, ErrorCode::invalid_argument,
                                  "rotation axis must be nonzero");
                        },
                        [](const TaylorGreen& f) {
                          const double balance = f.amplitude.dot(f.wavenumber);
                          const double scale = f.amplitude.norm() * f.wavenumber.norm();
                          require(std::abs(balance) <= 1e-12 * std::max(scale, 1e-300),
                                  ErrorCode::invalid_argument,
                                  "Taylor-Green amplitude must be orthogonal to the wavenumber");
                        },
                        [](const ShearFlow& f) {
                          require(f.normal_axis >= 0 && f.normal_axis < 3 && f.flow_axis >= 0 &&
                                      f.flow_axis < 3 && f.normal_axis != f.flow_axis,
                                  ErrorCode::invalid_argument,
                                  "shear flow needs two distinct axes in 0..2");
                        }},
             flow);
}

AnalyticFlow parse_flow(const std::string& text, const Box& volume) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::vector<double> v =
      colon == std::string::npos ? std::vector<double>{} : parse_numbers(text.substr(colon + 1));
  AnalyticFlow flow;
  if (kind == "uniform" && v.size() == 3) {
    flow = UniformFlow{{v[0], v[1], v[2]}};
  } else if (kind == "rotation" && v.size() == 3) {
    const Vec3 w(v[0], v[1], v[2]);
    require(w.norm() > 0.0, ErrorCode::invalid_argument, "rotation rate must be nonzero");
    flow = RigidRotation{w.normalized(), w.norm(), volume.center()};
  } else if (kind == "shear" && v.size() == 3) {
    const int normal = static_cast<int>(v[0]);
    const int along = static_cast<int>(v[1]);
    require(normal >= 0 && normal < 3, ErrorCode::invalid_argument,
            "shear flow: normal axis must be 0, 1 or 2");
    flow = ShearFlow{normal, along, v[2], volume.center()[normal]};
  } else if (kind == "taylor_green" && v.size() == 1) {
    flow = TaylorGreen::for_volume(volume, v[0]);
  } else if (kind == "taylor_green" && v.size() == 6) {
    flow = TaylorGreen{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, Vec3::Zero()};
  } else {
    raise(ErrorCode::invalid_argument, "unrecognized flow spec '" + text + "'");
  }
  validate(flow);
  return flow;
}

std::string describe(const AnalyticFlow& flow) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{[&](const UniformFlow& f) {
                          os << "uniform d=(" << f.displacement.transpose() << ")";
                        },
                        [&](const RigidRotation& f) {
                          os << "rotation axis=(" << f.axis.transpose() << ") omega=" << f.omega
                             << " center=(" << f.center.transpose() << ")";
                        },
                        [&](const TaylorGreen& f) {
                          os << "taylor_green a=(" << f.amplitude.transpose() << ") k=("
                             << f.wavenumber.transpose() << ") phase=(" << f.phase.transpose()
                             << ")";
                        },
                        [&](const ShearFlow& f) {
                          os << "shear normal=" << f.normal_axis << " flow=" << f.flow_axis
                             << " rate=" << f.rate << " offset=" << f.offset;
                        }},
             flow);
  return os.str();
}

std::vector<Camera> default_rig(int width, int height, const Box& volume) {
  require(width > 0 && height > 0, ErrorCode::invalid_argument, "image size must be positive");
  const double deg = std::numbers::pi / 180.0;
  const Vec3 center = volume.center();
  const Vec3 size = volume.size();
  const double distance = 4.0 * size.maxCoeff();
  const Vec2 principal(0.5 * (width - 1), 0.5 * (height - 1));

  struct View {
    Eigen::Matrix3d rotation;  // rows are the camera axes in world coordinates
    Vec3 position;
  };
  std::vector<View> views;
  for (const double sy : {-1.0, 1.0}) {
    for (const double sx : {-1.0, 1.0}) {
      const double a = std::sin(sx * 35.0 * deg);
      const double b = std::sin(sy * 18.0 * deg);
      const Vec3 axis(a, b, std::sqrt(1.0 - a * a - b * b));
      // Image rows follow the volume's x axis, so the long side of the
      // volume is not tilted into the short side of the image.
      const Vec3 x_axis = (Vec3::UnitX() - axis.x() * axis).normalized();
      const Vec3 y_axis = axis.cross(x_axis);
      View v;
      v.rotation.row(0) = x_axis.transpose();
      v.rotation.row(1) = y_axis.transpose();
      v.rotation.row(2) = axis.transpose();
      v.position = center - distance * axis;
      views.push_back(v);
    }
  }

  // Largest focal length that keeps every corner at least `border` pixels
  // inside the image.
  const double border = 4.0;
  double focal = std::numeric_limits<double>::infinity();
  for (const View& v : views) {
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner(c & 1 ? volume.hi.x() : volume.lo.x(), c & 2 ? volume.hi.y() : volume.lo.y(),
                        c & 4 ? volume.hi.z() : volume.lo.z());
      const Vec3 q = v.rotation * (corner - v.position);
      const double nx = std::abs(q.x() / q.z());
      const double ny = std::abs(q.y() / q.z());
      if (nx > 0.0) focal = std::min(focal, (principal.x() - border) / nx);
      if (ny > 0.0) focal = std::min(focal, (principal.y() - border) / ny);
    }
  }

  std::vector<Camera> rig;
  for (const View& v : views) {
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = focal;
    k(1, 1) = focal;
    k(0, 2) = principal.x();
    k(1, 2) = principal.y();
    Mat34 extrinsic;
    extrinsic.leftCols<3>() = v.rotation;
    extrinsic.col(3) = -v.rotation * v.position;
    rig.emplace_back(PinholeCamera(k * extrinsic));
  }
  return rig;
}

MotionGrid sample_truth(const AnalyticFlow& flow, GridDims dims, double spacing) {
  MotionGrid grid(dims, spacing);
  for (int k = 0; k < dims.nz; ++k) {
    for (int j = 0; j < dims.ny; ++j) {
      for (int i = 0; i < dims.nx; ++i) grid.set(i, j, k, velocity(flow, grid.position(i, j, k)));
    }
  }
  return grid;
}

SyntheticScene generate(const AnalyticFlow& flow, const SceneOptions& options) {
  return generate(flow, options, default_rig(options.width, options.height, options.volume));
}

SyntheticScene generate(const AnalyticFlow& flow, const SceneOptions& options,
                        std::vector<Camera> cameras) {
  validate(flow);
  require(options.ppp > 0.0, ErrorCode::invalid_argument, "seeding density must be positive");
  require(options.noise >= 0.0, ErrorCode::invalid_argument, "noise level must be nonnegative");
  require(!cameras.empty(), ErrorCode::invalid_argument, "scene needs at least one camera");

  SyntheticScene scene;
  scene.volume = options.volume;
  scene.ppp = options.ppp;
  scene.sigma = options.sigma;
  scene.cameras = std::move(cameras);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto count =
      static_cast<std::size_t>(std::llround(options.ppp * options.width * options.height));
  const Vec3 lo = options.volume.lo;
  const Vec3 size = options.volume.size();
  scene.particles_t0.resize(count);
  for (Particle& p : scene.particles_t0) {
    const double x = unit(rng);
    const double y = unit(rng);
    const double z = unit(rng);
    p.position = lo + size.cwiseProduct(Vec3(x, y, z));
    p.intensity = 0.5 + 0.5 * unit(rng);
  }
  scene.particles_t1 = scene.particles_t0;
  for (Particle& p : scene.particles_t1) p.position += velocity(flow, p.position);

  const BlobKernel kernel(options.sigma);
  std::normal_distribution<double> gauss(0.0, options.noise);
  for (const Camera& cam : scene.cameras) {
    scene.images.t0.push_back(
        render(scene.particles_t0, cam, kernel, options.width, options.height));
    scene.images.t1.push_back(
        render(scene.particles_t1, cam, kernel, options.width, options.height));
  }
  if (options.noise > 0.0) {
    for (auto* frame : {&scene.images.t0, &scene.images.t1}) {
      for (Image& img : *frame) {
        for (double& v : img.pixels()) v += gauss(rng);
      }
    }
  }

  const MotionGrid cover = MotionGrid::covering(options.volume, options.truth_spacing);
  scene.truth_flow = sample_truth(flow, cover.dims(), options.truth_spacing);
  return scene;
}

}  // namespace jointpiv
