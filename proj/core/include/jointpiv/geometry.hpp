#pragma once

#include <Eigen/Core>

namespace jointpiv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Axis-aligned measurement volume in voxel units.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static Box from_size(const Vec3& size) { return {Vec3::Zero(), size}; }

  Vec3 size() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double volume() const {
    const Vec3 s = size();
    return s.x() * s.y() * s.z();
  }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(lo).cwiseMin(hi); }
};

}  // namespace jointpiv
