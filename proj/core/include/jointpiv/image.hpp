#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace jointpiv {

/// Row-major scalar image; pixel (x, y) is a point sample at integer
/// coordinates, x along the row.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& operator()(int x, int y) { return pixels_[index(x, y)]; }
  double operator()(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  double squared_norm() const;
  double max_value() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Observations of K cameras at the two time steps.
struct ImageSet {
  std::vector<Image> t0;
  std::vector<Image> t1;

  std::size_t camera_count() const { return t0.size(); }
  void validate() const;
};

}  // namespace jointpiv
