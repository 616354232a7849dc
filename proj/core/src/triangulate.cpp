#include "jointpiv/triangulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "jointpiv/error.hpp"
#include "jointpiv/spatial_hash.hpp"

namespace jointpiv {

namespace {

// Offset and log-curvature of a three-point Gaussian fit through (-1, a),
// (0, b), (1, c). Falls back to a plain parabola when a sample is not positive.
struct AxisFit {
  double offset = 0.0;
  double log_gain = 0.0;  // log(peak / b)
};

AxisFit fit_axis(double a, double b, double c) {
  AxisFit fit;
  if (a > 0.0 && b > 0.0 && c > 0.0) {
    const double la = std::log(a), lb = std::log(b), lc = std::log(c);
    const double curvature = la - 2.0 * lb + lc;
    if (curvature < 0.0) {
      fit.offset = std::clamp((la - lc) / (2.0 * curvature), -0.5, 0.5);
      fit.log_gain = -0.5 * curvature * fit.offset * fit.offset;
      return fit;
    }
  }
  const double curvature = a - 2.0 * b + c;
  if (curvature < 0.0) {
    fit.offset = std::clamp((a - c) / (2.0 * curvature), -0.5, 0.5);
    const double peak = b - 0.125 * (a - c) * (a - c) / curvature;
    if (peak > 0.0 && b > 0.0) fit.log_gain = std::log(peak / b);
  }
  return fit;
}

class PeakIndex {
 public:
  PeakIndex(std::vector<Peak> peaks, int width, int height)
      : peaks_(std::move(peaks)),
        nx_(width / kCell + 1),
        ny_(height / kCell + 1),
        buckets_(static_cast<std::size_t>(nx_) * ny_) {
    for (std::size_t i = 0; i < peaks_.size(); ++i) {
      buckets_[bucket(peaks_[i].position)].push_back(i);
    }
  }

  const std::vector<Peak>& peaks() const { return peaks_; }

  /// Peaks within `radius` of the segment a-b, sorted by distance then index.
  std::vector<std::size_t> near_segment(const Vec2& a, const Vec2& b, double radius) const {
    std::vector<std::pair<double, std::size_t>> hits;
    const Vec2 lo = a.cwiseMin(b).array() - radius;
    const Vec2 hi = a.cwiseMax(b).array() + radius;
    const int bx0 = std::max(0, static_cast<int>(std::floor(lo.x() / kCell)));
    const int by0 = std::max(0, static_cast<int>(std::floor(lo.y() / kCell)));
    const int bx1 = std::min(nx_ - 1, static_cast<int>(std::floor(hi.x() / kCell)));
    const int by1 = std::min(ny_ - 1, static_cast<int>(std::floor(hi.y() / kCell)));
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        for (std::size_t id : buckets_[static_cast<std::size_t>(by) * nx_ + bx]) {
          const Vec2& q = peaks_[id].position;
          const double t = len2 > 0.0 ? std::clamp((q - a).dot(d) / len2, 0.0, 1.0) : 0.0;
          const double dist = (a + t * d - q).norm();
          if (dist <= radius) hits.emplace_back(dist, id);
        }
      }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<std::size_t> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.second);
    return out;
  }

 private:
  static constexpr int kCell = 4;

  std::size_t bucket(const Vec2& p) const {
    const int bx = std::clamp(static_cast<int>(std::floor(p.x() / kCell)), 0, nx_ - 1);
    const int by = std::clamp(static_cast<int>(std::floor(p.y() / kCell)), 0, ny_ - 1);
    return static_cast<std::size_t>(by) * nx_ + bx;
  }

  std::vector<Peak> peaks_;
  int nx_;
  int ny_;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace

std::vector<Peak> detect_peaks(const Image& image, double min_intensity) {
  std::vector<Peak> peaks;
  const int w = image.width();
  const int h = image.height();
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double v = image(x, y);
      if (v < min_intensity) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx != 0 || dy != 0) && !(v > image(x + dx, y + dy))) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      const AxisFit fx = fit_axis(image(x - 1, y), v, image(x + 1, y));
      const AxisFit fy = fit_axis(image(x, y - 1), v, image(x, y + 1));
      peaks.push_back({Vec2(x + fx.offset, y + fy.offset), v * std::exp(fx.log_gain + fy.log_gain)});
    }
  }
  return peaks;
}

std::optional<Triangulation> triangulate_point(std::span<const Vec2> pixels,
                                               std::span<const Camera> cameras,
                                               const Vec3& linearization) {
  require(pixels.size() == cameras.size() && pixels.size() >= 2, ErrorCode::invalid_argument,
          "triangulation needs one pixel per camera and at least two views");
  const auto n = static_cast<Eigen::Index>(pixels.size());
  Eigen::MatrixXd a(2 * n, 3);
  Eigen::VectorXd rhs(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec2& px = pixels[k];
    if (const auto* pin = std::get_if<PinholeCamera>(&cameras[k])) {
      const Mat34& m = pin->matrix();
      for (int r = 0; r < 2; ++r) {
        const Eigen::RowVector4d row = px[r] * m.row(2) - m.row(r);
        a.row(2 * k + r) = row.head<3>();
        rhs[2 * k + r] = -row[3];
      }
    } else {
      const Mat23 j = project_jacobian(cameras[k], linearization);
      const Vec2 f = project(cameras[k], linearization);
      a.block<2, 3>(2 * k, 0) = j;
      rhs.segment<2>(2 * k) = px - f + j * linearization;
    }
  }
  Vec3 x = a.colPivHouseholderQr().solve(rhs);
  if (!x.allFinite()) return std::nullopt;

  auto cost = [&](const Vec3& p, Eigen::VectorXd& r) {
    r.resize(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) r.segment<2>(2 * k) = project(cameras[k], p) - pixels[k];
    return r.squaredNorm();
  };
  try {
    Eigen::VectorXd r;
    double c = cost(x, r);
    for (int it = 0; it < 20; ++it) {
      Eigen::MatrixXd j(2 * n, 3);
      for (Eigen::Index k = 0; k < n; ++k) j.block<2, 3>(2 * k, 0) = project_jacobian(cameras[k], x);
      const Vec3 step = j.colPivHouseholderQr().solve(r);
      if (!step.allFinite()) return std::nullopt;
      double scale = 1.0;
      bool improved = false;
      Eigen::VectorXd rt;
      for (int h = 0; h < 10; ++h) {
        const Vec3 trial = x - scale * step;
        const double ct = cost(trial, rt);
        if (ct <= c) {
          x = trial;
          c = ct;
          r = rt;
          improved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!improved || scale * step.norm() < 1e-12 * (1.0 + x.norm())) break;
    }
    double worst = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) worst = std::max(worst, r.segment<2>(2 * k).norm());
    if (!std::isfinite(worst)) return std::nullopt;
    return Triangulation{x, worst};
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<Candidate> propose(std::span<const Image> residuals, std::span<const Camera> cameras,
                               const Box& volume, const ProposalOptions& options,
                               std::span<const Particle> existing) {
  const std::size_t k_views = cameras.size();
  require(k_views >= 2 && residuals.size() == k_views, ErrorCode::invalid_argument,
          "proposal generation needs at least two cameras with one residual image each");

  std::vector<PeakIndex> index;
  index.reserve(k_views);
  for (std::size_t k = 0; k < k_views; ++k) {
    index.emplace_back(detect_peaks(residuals[k], options.min_intensity), residuals[k].width(),
                       residuals[k].height());
  }

  PointHash known(std::max(options.duplicate_radius, 1e-6));
  for (std::size_t i = 0; i < existing.size(); ++i) known.insert(existing[i].position, i);
  auto is_duplicate = [&](const Vec3& p) {
    bool hit = false;
    known.for_each_within(p, options.duplicate_radius, [&](std::size_t, double) { hit = true; });
    return hit;
  };

  const double eps = options.epsilon;
  const Vec3 center = volume.center();
  std::vector<Candidate> out;

  for (const Peak& ref : index[0].peaks()) {
    Ray ray;
    try {
      ray = ray_through(cameras[0], ref.position, volume);
    } catch (const Error&) {
      continue;
    }
    // Epipolar segments of the reference line of sight in every other view.
    std::vector<std::pair<Vec2, Vec2>> segments(k_views);
    bool visible = true;
    for (std::size_t k = 1; k < k_views && visible; ++k) {
      try {
        segments[k] = {project(cameras[k], ray.entry), project(cameras[k], ray.exit)};
      } catch (const Error&) {
        visible = false;
      }
    }
    if (!visible) continue;

    std::vector<Vec2> chosen{ref.position};
    std::vector<Candidate> found;
    int combinations = 0;

    std::function<void(std::size_t)> search = [&](std::size_t view) {
      if (combinations >= options.max_combinations) return;
      if (view == k_views) {
        ++combinations;
        const auto tri = triangulate_point(chosen, cameras, center);
        if (!tri || tri->error > eps) return;
        if (!volume.contains(tri->position, 1.0)) return;
        found.push_back({volume.clamp(tri->position), 0.0, tri->error});
        return;
      }
      std::vector<std::size_t> hits =
          index[view].near_segment(segments[view].first, segments[view].second, eps);
      if (view >= 2) {
        // Narrow down with the point triangulated from the views chosen so far.
        const auto partial = triangulate_point(chosen, cameras.first(view), center);
        if (!partial) return;
        Vec2 predicted;
        try {
          predicted = project(cameras[view], partial->position);
        } catch (const Error&) {
          return;
        }
        const double radius = 2.0 * eps;
        std::erase_if(hits, [&](std::size_t id) {
          return (index[view].peaks()[id].position - predicted).norm() > radius;
        });
      }
      for (std::size_t id : hits) {
        chosen.push_back(index[view].peaks()[id].position);
        search(view + 1);
        chosen.pop_back();
        if (combinations >= options.max_combinations) return;
      }
    };
    search(1);

    std::erase_if(found, [&](const Candidate& c) { return is_duplicate(c.position); });
    const double m = static_cast<double>(found.size());
    const double k = static_cast<double>(k_views);
    for (Candidate& c : found) {
      c.intensity = ref.intensity * k / (k - 1.0 + m);
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace jointpiv
