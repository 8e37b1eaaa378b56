#include "sgdnoise/plateau.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sgdnoise {

PlateauReport detect_plateau(std::span<const double> series, std::size_t window, double rel_tol) {
  if (window == 0) throw std::invalid_argument("detect_plateau: window must be positive");
  if (series.size() < 2 * window) throw std::invalid_argument("detect_plateau: series shorter than two windows");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("detect_plateau: rel_tol must be >= 0");

  const std::size_t n = series.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];
  auto trailing = [&](std::size_t t) { return (prefix[t + 1] - prefix[t + 1 - window]) / double(window); };

  PlateauReport report;
  report.plateau_value = trailing(n - 1);

  const std::size_t first = 2 * window - 1;
  std::size_t settled_from = n;  // smallest t with all pairs from t on settled
  for (std::size_t t = n; t-- > first;) {
    const double now = trailing(t);
    const double before = trailing(t - window);
    if (std::abs(now - before) <= rel_tol * std::abs(now)) {
      settled_from = t;
    } else {
      break;
    }
  }
  if (settled_from == n) return report;

  report.found = true;
  report.onset_step = settled_from - first;
  double band = 0.0;
  for (std::size_t t = std::max(settled_from, window - 1); t < n; ++t) {
    band = std::max(band, std::abs(trailing(t) - report.plateau_value));
  }
  report.band_halfwidth = band;
  return report;
}

}  // namespace sgdnoise
