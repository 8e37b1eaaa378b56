#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace sgdnoise {

struct PlateauReport {
  bool found = false;
  double plateau_value = 0.0;   // mean over the final window
  std::uint64_t onset_step = 0;  // first index of the first window pair that stays within tolerance
  double band_halfwidth = 0.0;  // max |trailing mean - plateau_value| from the onset on
};

/// Saturation test on trailing-window means m(t) = mean(series[t-w+1..t]).
/// A window pair is settled when |m(t) - m(t-w)| <= rel_tol |m(t)|; the plateau
/// starts at the earliest t after which every pair is settled. A series that
/// never settles yields found = false rather than an error. Requires
/// series.size() >= 2 * window and window >= 1.
PlateauReport detect_plateau(std::span<const double> series, std::size_t window, double rel_tol);

}  // namespace sgdnoise
