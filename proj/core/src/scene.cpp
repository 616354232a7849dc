#include "jointpiv/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jointpiv/error.hpp"
#include "jointpiv/spatial_hash.hpp"

namespace jointpiv {

BlobKernel::BlobKernel(double s) : sigma(s) {
  require(s > 0.0 && std::isfinite(s), ErrorCode::invalid_argument, "blob sigma must be positive");
}

double BlobKernel::operator()(double squared_distance) const {
  return std::exp(-squared_distance / (2.0 * sigma * sigma));
}

void BlobFootprint::compute(const Vec2& c, const BlobKernel& kernel, int width, int height) {
  center = c;
  const double r = kernel.radius();
  const double r2 = r * r;
  x0 = std::max(0, static_cast<int>(std::ceil(c.x() - r)));
  x1 = std::min(width - 1, static_cast<int>(std::floor(c.x() + r)));
  y0 = std::max(0, static_cast<int>(std::ceil(c.y() - r)));
  y1 = std::min(height - 1, static_cast<int>(std::floor(c.y() + r)));
  const double scale = -1.0 / (2.0 * kernel.sigma * kernel.sigma);
  const auto nx = static_cast<std::size_t>(std::max(0, x1 - x0 + 1));
  const auto ny = static_cast<std::size_t>(std::max(0, y1 - y0 + 1));
  gx.resize(nx);
  gy.resize(ny);
  row_begin.resize(ny);
  row_end.resize(ny);
  for (int x = x0; x <= x1; ++x) {
    const double dx = x - c.x();
    gx[x - x0] = std::exp(scale * dx * dx);
  }
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - c.y();
    gy[y - y0] = std::exp(scale * dy * dy);
    // Same inclusion rule as dx^2 + dy^2 <= r^2, resolved per row.
    int b = x0;
    while (b <= x1 && (b - c.x()) * (b - c.x()) + dy * dy > r2) ++b;
    int e = x1;
    while (e >= b && (e - c.x()) * (e - c.x()) + dy * dy > r2) --e;
    row_begin[y - y0] = b;
    row_end[y - y0] = e + 1;
  }
}

void splat(Image& image, const BlobFootprint& f, double intensity) {
  for (int y = f.y0; y <= f.y1; ++y) {
    const double wy = intensity * f.gy[y - f.y0];
    double* row = &image(0, y);
    const double* gx = f.gx.data() - f.x0;
    for (int x = f.row_begin[y - f.y0]; x < f.row_end[y - f.y0]; ++x) row[x] += wy * gx[x];
  }
}

void splat(Image& image, const Vec2& center, double intensity, const BlobKernel& kernel) {
  thread_local BlobFootprint f;
  f.compute(center, kernel, image.width(), image.height());
  splat(image, f, intensity);
}

Image render(std::span<const Particle> particles, const Camera& camera, const BlobKernel& kernel,
             int width, int height) {
  Image out(width, height);
  for (const Particle& p : particles) splat(out, project(camera, p.position), p.intensity, kernel);
  return out;
}

Image render_warped(std::span<const Particle> particles, const MotionGrid& grid,
                    const Camera& camera, const BlobKernel& kernel, int width, int height) {
  Image out(width, height);
  for (const Particle& p : particles) {
    const Vec3 moved = p.position + eval(grid, p.position);
    splat(out, project(camera, moved), p.intensity, kernel);
  }
  return out;
}

Image residual(const Image& observed, const Image& predicted) {
  require(observed.width() == predicted.width() && observed.height() == predicted.height(),
          ErrorCode::dimension_mismatch, "residual: image dimensions differ");
  Image out(observed.width(), observed.height());
  auto o = observed.pixels();
  auto p = predicted.pixels();
  auto r = out.pixels();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = o[i] - p[i];
  return out;
}

ParticleSet prune_zero(std::span<const Particle> particles) {
  ParticleSet out;
  out.reserve(particles.size());
  std::copy_if(particles.begin(), particles.end(), std::back_inserter(out),
               [](const Particle& p) { return p.intensity != 0.0; });
  return out;
}

ParticleSet merge_close(std::span<const Particle> particles, double radius) {
  if (radius <= 0.0 || particles.size() < 2) return {particles.begin(), particles.end()};
  std::vector<std::size_t> order(particles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return particles[a].intensity > particles[b].intensity;
  });
  PointHash index(radius);
  for (std::size_t i = 0; i < particles.size(); ++i) index.insert(particles[i].position, i);

  std::vector<char> taken(particles.size(), 0);
  ParticleSet out;
  out.reserve(particles.size());
  for (std::size_t i : order) {
    if (taken[i]) continue;
    taken[i] = 1;
    const Particle& seed = particles[i];
    double total = seed.intensity;
    Vec3 moment = seed.intensity * seed.position;
    index.for_each_within(seed.position, radius, [&](std::size_t j, double) {
      if (taken[j]) return;
      taken[j] = 1;
      total += particles[j].intensity;
      moment += particles[j].intensity * particles[j].position;
    });
    out.push_back({total > 0.0 ? Vec3(moment / total) : seed.position, total});
  }
  return out;
}

Image rescale_blobs(const Image& image, double from_sigma, double to_sigma) {
  if (to_sigma <= from_sigma) return image;
  const double s = std::sqrt(to_sigma * to_sigma - from_sigma * from_sigma);
  const int radius = static_cast<int>(std::ceil(4.0 * s));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (s * s));
    total += taps[i + radius];
  }
  const double gain = (to_sigma * to_sigma) / (from_sigma * from_sigma);
  for (double& t : taps) t /= total;

  const int w = image.width();
  const int h = image.height();
  Image tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = std::max(-radius, -x); i <= std::min(radius, w - 1 - x); ++i) {
        acc += taps[i + radius] * image(x + i, y);
      }
      tmp(x, y) = acc;
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = std::max(-radius, -y); i <= std::min(radius, h - 1 - y); ++i) {
        acc += taps[i + radius] * tmp(x, y + i);
      }
      out(x, y) = gain * acc;
    }
  }
  return out;
}

}  // namespace jointpiv
