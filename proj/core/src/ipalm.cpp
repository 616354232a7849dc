#include "jointpiv/ipalm.hpp"

#include <algorithm>
#include <numeric>

#include "jointpiv/error.hpp"

namespace jointpiv {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Roundoff allowance of the descent test, relative to the energy scale.
double test_slack(double reference, double candidate) {
  return 1e-12 * std::max({std::abs(reference), std::abs(candidate), 1e-300});
}

}  // namespace

const char* to_string(Block block) noexcept {
  switch (block) {
    case Block::positions: return "positions";
    case Block::intensities: return "intensities";
    case Block::flow: return "flow";
  }
  return "?";
}

BlockState BlockState::start(BlockVectors z) {
  BlockState s;
  s.current = std::move(z);
  s.previous = s.current;
  return s;
}

Ipalm::Ipalm(SmoothObjective& objective, ProxSet prox, IpalmOptions options)
    : objective_(objective), prox_(std::move(prox)), options_(options) {
  require(options_.max_iterations >= 1, ErrorCode::invalid_argument,
          "ipalm: max_iterations must be at least 1");
  require(options_.inertia >= 0.0 && options_.inertia < 1.0, ErrorCode::invalid_argument,
          "ipalm: inertia must lie in [0, 1)");
}

double Ipalm::energy(const BlockVectors& z) {
  SmoothObjective::Evaluation e;
  objective_.evaluate(z, e);
  double total = e.value;
  for (int b = 0; b < 3; ++b) {
    if (prox_[b].value) total += prox_[b].value(z[b]);
  }
  return total;
}

void Ipalm::ensure_reference(const BlockState& state) {
  if (!reference_valid_) {
    objective_.evaluate(state.current, reference_);
    reference_valid_ = true;
  }
}

IterationRecord Ipalm::step(BlockState& state, ConvergenceReport& report) {
  // The cached reference may belong to a different state.
  reference_valid_ = false;
  return sweep(state, report);
}

IterationRecord Ipalm::sweep(BlockState& state, ConvergenceReport& report) {
  IterationRecord record;
  record.iteration = iteration_;
  ensure_reference(state);

  double step_sq = 0.0;
  double norm_sq = 0.0;
  BlockVectors work = state.current;

  for (Block block : kBlockOrder) {
    const int b = static_cast<int>(block);
    if (!options_.active[b]) continue;
    const std::vector<double>& zn = state.current[b];
    const std::vector<double>& zprev = state.previous[b];
    const std::size_t n = zn.size();

    std::vector<double> zhat(n);
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      zhat[i] = zn[i] + options_.inertia * (zn[i] - zprev[i]);
      moved = moved || zhat[i] != zn[i];
    }
    const std::vector<double>* grad = &reference_.gradient[b];
    if (moved) {
      work[b] = zhat;
      objective_.evaluate(work, extrapolated_);
      grad = &extrapolated_.gradient[b];
    }

    double lipschitz = state.lipschitz[b];
    int backtracks = 0;
    std::vector<double> candidate(n);
    std::vector<double> d(n);
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) candidate[i] = zhat[i] - (*grad)[i] / lipschitz;
      if (prox_[b].apply) prox_[b].apply(candidate, lipschitz);
      for (std::size_t i = 0; i < n; ++i) d[i] = candidate[i] - zn[i];
      work[b] = candidate;
      objective_.evaluate(work, trial_);

      const double lin = dot(reference_.gradient[b], d);
      const double quad = 0.5 * dot(d, d);
      const double rhs = reference_.value + lin + lipschitz * quad;
      const double slack = test_slack(reference_.value, trial_.value);
      if (trial_.value <= rhs + slack) {
        if (options_.record_audit) {
          report.audit.push_back({iteration_, block, trial_.value, rhs, slack, lipschitz});
        }
        // No roundoff allowance here: near a stationary point the allowance
        // alone would keep halving the constant.
        if (options_.increase_steps && trial_.value <= reference_.value + lin + 0.5 * lipschitz * quad) {
          lipschitz *= 0.5;
        }
        break;
      }
      if (++backtracks > options_.max_backtracks) {
        raise(ErrorCode::step_failure,
              std::string("ipalm: backtracking on block '") + to_string(block) +
                  "' exceeded the doubling limit");
      }
      lipschitz *= 2.0;
    }

    step_sq += dot(d, d);
    norm_sq += dot(zn, zn);
    state.previous[b] = state.current[b];
    state.current[b] = candidate;
    state.lipschitz[b] = lipschitz;
    std::swap(reference_, trial_);
    record.backtracks += backtracks;
    report.update_order.push_back(block);
  }

  double energy = reference_.value;
  for (int b = 0; b < 3; ++b) {
    if (prox_[b].value) energy += prox_[b].value(state.current[b]);
  }
  record.energy = energy;
  record.lipschitz = state.lipschitz;
  record.relative_step = norm_sq > 0.0 ? std::sqrt(step_sq / norm_sq) : std::sqrt(step_sq);
  report.total_backtracks += record.backtracks;
  report.iterations.push_back(record);
  ++iteration_;
  return record;
}

ConvergenceReport Ipalm::run(BlockState& state) {
  ConvergenceReport report;
  iteration_ = 0;
  reference_valid_ = false;
  for (int it = 0; it < options_.max_iterations; ++it) {
    const IterationRecord r = sweep(state, report);
    if (r.relative_step < options_.tolerance) {
      report.converged = true;
      break;
    }
  }
  return report;
}

}  // namespace jointpiv
