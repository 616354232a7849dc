#pragma once

#include <array>
#include <span>
#include <variant>
#include <vector>

#include "jointpiv/geometry.hpp"

namespace jointpiv {

/// Perspective camera described by a 3x4 projection matrix acting on
/// homogeneous voxel coordinates.
class PinholeCamera {
 public:
  explicit PinholeCamera(const Mat34& matrix);

  const Mat34& matrix() const { return matrix_; }

  Vec2 project(const Vec3& p) const;
  Mat23 jacobian(const Vec3& p) const;

 private:
  double depth(const Vec3& p) const;

  Mat34 matrix_;
};

/// Soloff polynomial camera: cubic in x and y, quadratic in z, no
/// perspective division. Used behind refractive interfaces where a pinhole
/// model does not hold.
class PolynomialCamera {
 public:
  static constexpr int kTerms = 19;
  using Coefficients = std::array<Vec2, kTerms>;

  explicit PolynomialCamera(const Coefficients& coefficients);

  const Coefficients& coefficients() const { return coefficients_; }

  /// Monomials in the fixed order 1, x, y, z, x², xy, y², xz, yz, z², x³,
  /// x²y, xy², y³, x²z, xyz, y²z, xz², yz².
  static std::array<double, kTerms> monomials(const Vec3& p);
  static Eigen::Matrix<double, kTerms, 3> monomial_gradients(const Vec3& p);

  Vec2 project(const Vec3& p) const;
  Mat23 jacobian(const Vec3& p) const;

 private:
  Coefficients coefficients_;
};

using Camera = std::variant<PinholeCamera, PolynomialCamera>;

Vec2 project(const Camera& camera, const Vec3& p);
Mat23 project_jacobian(const Camera& camera, const Vec3& p);

/// Solves project(camera, (x, y, z)) == pixel for (x, y) at a fixed depth.
/// The polynomial model is inverted by damped Newton iteration starting at
/// `initial_xy`.
Vec2 back_project(const Camera& camera, const Vec2& pixel, double z,
                  const Vec2& initial_xy = Vec2::Zero());

/// Line of sight through a pixel, clipped to the volume.
struct Ray {
  Vec3 entry;
  Vec3 exit;
};

Ray ray_through(const Camera& camera, const Vec2& pixel, const Box& volume);

struct Correspondence {
  Vec3 point;
  Vec2 pixel;
};

PolynomialCamera fit_polynomial(std::span<const Correspondence> correspondences);

}  // namespace jointpiv
