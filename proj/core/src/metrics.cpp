#include "jointpiv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "jointpiv/error.hpp"
#include "jointpiv/spatial_hash.hpp"

namespace jointpiv {

FlowMetrics flow_metrics(const MotionGrid& estimate, const MotionGrid& truth) {
  const MotionGrid* reference = &truth;
  MotionGrid resampled;
  if (!(truth.dims() == estimate.dims()) || truth.spacing() != estimate.spacing()) {
    require((truth.extent() - estimate.extent()).cwiseAbs().maxCoeff() <= 1e-9,
            ErrorCode::dimension_mismatch,
            "flow metrics: estimate and truth grids cover different extents");
    resampled = prolongate(truth, estimate.dims(), estimate.spacing());
    reference = &resampled;
  }

  const GridDims& d = estimate.dims();
  FlowMetrics m;
  double angle_sum = 0.0;
  std::size_t angle_count = 0;
  for (int k = 0; k < d.nz; ++k) {
    for (int j = 0; j < d.ny; ++j) {
      for (int i = 0; i < d.nx; ++i) {
        const Vec3 e = estimate.at(i, j, k);
        const Vec3 t = reference->at(i, j, k);
        m.aee += (e - t).norm();
        const double ne = e.norm();
        const double nt = t.norm();
        if (ne >= 1e-9 && nt >= 1e-9) {
          const double cosine = std::clamp(e.dot(t) / (ne * nt), -1.0, 1.0);
          angle_sum += std::acos(cosine) * 180.0 / std::numbers::pi;
          ++angle_count;
        }
      }
    }
  }
  m.aee /= static_cast<double>(d.vertex_count());
  m.aae = angle_count > 0 ? angle_sum / static_cast<double>(angle_count) : 0.0;

  const DivergenceOperator op(d);
  const std::vector<double> div = op.apply(estimate.coeffs());
  for (double v : div) m.aad += std::abs(v);
  m.aad /= static_cast<double>(div.size());
  return m;
}

ParticleMetrics particle_metrics(std::span<const Particle> estimate,
                                 std::span<const Particle> truth, double threshold) {
  require(threshold > 0.0, ErrorCode::invalid_argument, "match threshold must be positive");
  PointHash index(threshold);
  for (std::size_t j = 0; j < truth.size(); ++j) index.insert(truth[j].position, j);

  struct Pair {
    double d2;
    std::size_t est;
    std::size_t tru;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    index.for_each_within(estimate[i].position, threshold, [&](std::size_t j, double d2) {
      if (d2 < threshold * threshold) pairs.push_back({d2, i, j});
    });
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.est != b.est) return a.est < b.est;
    return a.tru < b.tru;
  });
  std::vector<char> used_est(estimate.size(), 0);
  std::vector<char> used_tru(truth.size(), 0);
  ParticleMetrics m;
  m.threshold = threshold;
  for (const Pair& p : pairs) {
    if (used_est[p.est] || used_tru[p.tru]) continue;
    used_est[p.est] = used_tru[p.tru] = 1;
    ++m.matched;
  }
  m.precision = estimate.empty() ? 1.0 : static_cast<double>(m.matched) / estimate.size();
  m.recall = truth.empty() ? 1.0 : static_cast<double>(m.matched) / truth.size();
  return m;
}

}  // namespace jointpiv
