#include "jointpiv/image.hpp"

#include <algorithm>
#include <cmath>

#include "jointpiv/error.hpp"

namespace jointpiv {

Image::Image(int width, int height, double fill)
    : width_(width),
      height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  require(width > 0 && height > 0, ErrorCode::invalid_argument,
          "image dimensions must be positive");
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  require(width > 0 && height > 0, ErrorCode::invalid_argument,
          "image dimensions must be positive");
  require(pixels_.size() == static_cast<std::size_t>(width) * height,
          ErrorCode::dimension_mismatch, "image pixel count does not match its dimensions");
}

double Image::squared_norm() const {
  double s = 0.0;
  for (double v : pixels_) s += v * v;
  return s;
}

double Image::max_value() const {
  return pixels_.empty() ? 0.0 : *std::max_element(pixels_.begin(), pixels_.end());
}

void ImageSet::validate() const {
  require(!t0.empty(), ErrorCode::invalid_argument, "image set has no cameras");
  require(t0.size() == t1.size(), ErrorCode::dimension_mismatch,
          "image set: both time steps need one image per camera");
  for (std::size_t k = 0; k < t0.size(); ++k) {
    require(t0[k].width() == t1[k].width() && t0[k].height() == t1[k].height() &&
                !t0[k].empty(),
            ErrorCode::dimension_mismatch,
            "image set: camera " + std::to_string(k) + " has mismatched image sizes");
  }
}

}  // namespace jointpiv
