#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sgdnoise {

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

/// Writes a bare-bones SVG line plot of several series against a shared x axis.
/// Non-finite and (with log_y) non-positive points are skipped.
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::vector<double>& x,
                         const std::vector<PlotSeries>& series, bool log_y = false);

}  // namespace sgdnoise
