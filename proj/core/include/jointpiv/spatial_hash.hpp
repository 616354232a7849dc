#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "jointpiv/geometry.hpp"

namespace jointpiv {

/// Uniform bucket grid over 3D points for fixed-radius neighbour queries.
class PointHash {
 public:
  explicit PointHash(double cell) : cell_(cell) {}

  void insert(const Vec3& p, std::size_t id) {
    buckets_[key(cell_of(p))].push_back({p, id});
  }

  /// Calls f(id, squared_distance) for every stored point within `radius`.
  template <class F>
  void for_each_within(const Vec3& p, double radius, F&& f) const {
    const auto c = cell_of(p);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (int dz = -reach; dz <= reach; ++dz) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const auto it = buckets_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == buckets_.end()) continue;
          for (const Entry& e : it->second) {
            const double d2 = (e.point - p).squaredNorm();
            if (d2 <= r2) f(e.id, d2);
          }
        }
      }
    }
  }

 private:
  struct Entry {
    Vec3 point;
    std::size_t id;
  };

  std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
    const auto h = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1FFFFFu; };
    return (h(c[0]) << 42) | (h(c[1]) << 21) | h(c[2]);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Entry>> buckets_;
};

}  // namespace jointpiv
