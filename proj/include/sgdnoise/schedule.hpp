#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sgdnoise {

/// Averaging method whose equivalent learning rate a derived schedule applies.
enum class AveragingMethod { swa, two_point, ema };

std::string to_string(AveragingMethod method);
AveragingMethod averaging_method_from_string(const std::string& name);

/// Multiplier applied by a derived schedule over the window [t1, t2).
/// Outside the window the base rate is returned unchanged.
struct WindowTransform {
  AveragingMethod method = AveragingMethod::two_point;
  std::uint64_t t1 = 0;
  std::uint64_t t2 = 1;
  double ema_decay = 0.0;  // delta, EMA only

  /// Multiplier at absolute step `step` (1 outside the window).
  double multiplier(std::uint64_t step) const;
};

/// Step-indexed learning rate.
class Schedule {
 public:
  struct Constant { double lr; };
  struct LinearDecay { double lr0; std::uint64_t horizon; };
  struct Cosine { double lr0; std::uint64_t horizon; };
  struct Table { std::vector<std::pair<std::uint64_t, double>> points; };
  struct Derived { std::shared_ptr<const Schedule> base; WindowTransform transform; };
  using Variant = std::variant<Constant, LinearDecay, Cosine, Table, Derived>;

  static Schedule constant(double lr);
  /// lr0 (T - i) / T for i <= T, 0 afterwards.
  static Schedule linear_decay(double lr0, std::uint64_t horizon);
  /// lr0/2 (1 + cos(pi i / T)) for i <= T, 0 afterwards.
  static Schedule cosine(double lr0, std::uint64_t horizon);
  /// Piecewise constant between breakpoints; domain [first step, last step].
  static Schedule table(std::vector<std::pair<std::uint64_t, double>> points);
  static Schedule derived(Schedule base, WindowTransform transform);

  /// Learning rate at `step`. Throws std::out_of_range outside the domain.
  double eval(std::uint64_t step) const;
  double operator()(std::uint64_t step) const { return eval(step); }

  /// Inclusive step range on which eval is defined (upper bound nullopt = unbounded).
  std::pair<std::uint64_t, std::optional<std::uint64_t>> domain() const;
  bool contains(std::uint64_t step) const;

  const Variant& variant() const { return v_; }
  std::string describe() const;

 private:
  explicit Schedule(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

}  // namespace sgdnoise
