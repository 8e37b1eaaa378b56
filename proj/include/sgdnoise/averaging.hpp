#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sgdnoise/trajectory.hpp"

namespace sgdnoise {

/// Finite averaging kernel: weights[k] multiplies the iterate k steps in the past.
struct Kernel {
  std::vector<double> weights;
  std::optional<std::uint64_t> truncated_at;  // EMA: last kept index K
  std::string label;

  std::size_t support() const { return weights.size(); }
  /// Largest k with a nonzero weight.
  std::size_t max_lag() const;
};

struct KernelSpec {
  struct TwoPoint { std::uint64_t delta; };
  struct Swa { std::uint64_t k; };
  struct Ema { double decay; std::uint64_t truncation; };
  struct MultiPoint { std::uint64_t n; std::uint64_t delta; };
  struct Custom { std::vector<double> weights; bool allow_negative = false; };
  std::variant<TwoPoint, Swa, Ema, MultiPoint, Custom> shape;
};

inline constexpr double kKernelSumTolerance = 1e-9;

/// Builds a normalised kernel:
///  - two_point(D): mu_0 = mu_D = 1/2 (D = 0 collapses to mu_0 = 1)
///  - swa(k): mu_0..mu_{k-1} = 1/k
///  - ema(delta, K): mu_j proportional to delta (1 - delta)^j for j <= K, renormalised;
///    requires K >= ceil(10 / delta)
///  - multi_point(n, D): mu_{jD} = 1/n for j < n
///  - custom: weights must sum to 1 within 1e-9 and be nonnegative unless allowed
Kernel make_kernel(const KernelSpec& spec);

Kernel identity_kernel();
Kernel two_point_kernel(std::uint64_t delta);
Kernel swa_kernel(std::uint64_t k);
Kernel ema_kernel(double decay, std::uint64_t truncation);
Kernel multi_point_kernel(std::uint64_t n, std::uint64_t delta);

/// C_delta = sum_k mu_k mu_{k+delta} for delta = 0..delta_max.
std::vector<double> kernel_autocorrelation(const Kernel& kernel, std::size_t delta_max);

/// Weighted average of iterates; history.back() is the newest iterate and
/// must reach back max_lag() steps.
VectorXd average_iterates(const Kernel& kernel, std::span<const VectorXd> history);

/// Weighted average sum_k mu_k theta_{at_step - k} using the record's snapshots.
/// Throws std::out_of_range naming the first missing step.
VectorXd apply_kernel(const TrajectoryRecord& record, const Kernel& kernel, std::uint64_t at_step);

/// Streaming EMA / SWA accumulator.
///
/// EMA keeps the bias-corrected form S_t / W_t with S_t = (1-delta) S_{t-1} + delta theta_t
/// and W_t = (1-delta) W_{t-1} + delta, which equals the renormalised truncated
/// kernel at every step. SWA keeps the running mean of all updates.
class OnlineAverager {
 public:
  static OnlineAverager ema(double decay);
  static OnlineAverager swa();

  void update(const VectorXd& theta);
  /// Throws std::logic_error before the first update.
  VectorXd current() const;
  std::uint64_t count() const { return count_; }

 private:
  enum class Kind { ema, swa };
  OnlineAverager(Kind kind, double decay) : kind_(kind), decay_(decay) {}
  Kind kind_;
  double decay_;
  std::uint64_t count_ = 0;
  VectorXd sum_;
  double weight_ = 0.0;
};

}  // namespace sgdnoise
