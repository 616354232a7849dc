#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace jointpiv {

/// Variable blocks in the order they are updated.
enum class Block : int { positions = 0, intensities = 1, flow = 2 };
inline constexpr std::array<Block, 3> kBlockOrder{Block::positions, Block::intensities,
                                                  Block::flow};
const char* to_string(Block block) noexcept;

using BlockVectors = std::array<std::vector<double>, 3>;

/// Smooth coupling term H with partial gradients for every block.
class SmoothObjective {
 public:
  struct Evaluation {
    double value = 0.0;
    BlockVectors gradient;
  };

  virtual ~SmoothObjective() = default;
  virtual void evaluate(const BlockVectors& z, Evaluation& out) = 0;
};

/// Backward step of one block: `apply` maps the forward iterate to the
/// proximal point for step 1/L, `value` evaluates the nonsmooth term for
/// energy reporting. An empty `apply` is the identity (F_z = 0).
struct BlockProx {
  std::function<void(std::span<double> z, double lipschitz)> apply;
  std::function<double(std::span<const double> z)> value;
};

using ProxSet = std::array<BlockProx, 3>;

struct IpalmOptions {
  double inertia = 1.0 / std::sqrt(2.0);
  int max_iterations = 40;
  double tolerance = 1e-6;  // relative step norm over all active blocks
  int max_backtracks = 60;
  bool increase_steps = true;
  std::array<bool, 3> active{true, true, true};
  bool record_audit = false;
};

struct BlockState {
  BlockVectors current;
  BlockVectors previous;
  std::array<double, 3> lipschitz{1.0, 1.0, 1.0};

  static BlockState start(BlockVectors z);
  /// Drops the inertia memory, e.g. after the particle set changed size.
  void reset_momentum() { previous = current; }
};

/// One accepted block update and both sides of the descent inequality
///   H(z+) <= H(z) + <grad H(z), z+ - z> + L/2 ||z+ - z||^2.
struct DescentCheck {
  int iteration = 0;
  Block block = Block::positions;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double lipschitz = 0.0;

  bool satisfied() const { return lhs <= rhs + slack; }
};

struct IterationRecord {
  int iteration = 0;
  double energy = 0.0;
  std::array<double, 3> lipschitz{};
  int backtracks = 0;
  double relative_step = 0.0;
};

struct ConvergenceReport {
  std::vector<IterationRecord> iterations;
  std::vector<DescentCheck> audit;
  std::vector<Block> update_order;
  bool converged = false;
  int total_backtracks = 0;
};

/// Inertial proximal alternating linearized minimization over the blocks
/// (positions, intensities, flow).
class Ipalm {
 public:
  Ipalm(SmoothObjective& objective, ProxSet prox, IpalmOptions options = {});

  /// One sweep p -> c -> u. Throws ErrorCode::step_failure when backtracking
  /// exceeds options.max_backtracks doublings.
  IterationRecord step(BlockState& state, ConvergenceReport& report);

  /// Repeats `step` until the relative step norm drops below the tolerance or
  /// max_iterations is reached.
  ConvergenceReport run(BlockState& state);

  /// H + sum of nonsmooth block values at z.
  double energy(const BlockVectors& z);

  const IpalmOptions& options() const { return options_; }

 private:
  IterationRecord sweep(BlockState& state, ConvergenceReport& report);
  void ensure_reference(const BlockState& state);

  SmoothObjective& objective_;
  ProxSet prox_;
  IpalmOptions options_;
  int iteration_ = 0;

  // Evaluation at the current iterate, reused as the comparison point of the
  // next block's descent test.
  SmoothObjective::Evaluation reference_;
  bool reference_valid_ = false;
  SmoothObjective::Evaluation trial_;
  SmoothObjective::Evaluation extrapolated_;
};

}  // namespace jointpiv
