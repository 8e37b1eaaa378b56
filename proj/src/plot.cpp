#include "sgdnoise/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace sgdnoise {

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::vector<double>& x,
                         const std::vector<PlotSeries>& series, bool log_y) {
  constexpr double width = 720, height = 440, left = 70, right = 20, top = 40, bottom = 50;
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  auto ty = [log_y](double v) { return log_y ? std::log10(v) : v; };
  auto usable = [log_y](double v) { return std::isfinite(v) && (!log_y || v > 0.0); };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (double v : x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i)
      if (usable(s.y[i])) {
        ymin = std::min(ymin, ty(s.y[i]));
        ymax = std::max(ymax, ty(s.y[i]));
      }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;

  auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * (width - left - right); };
  auto py = [&](double v) { return height - bottom - (ty(v) - ymin) / (ymax - ymin) * (height - top - bottom); };

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\">" << title
      << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << left << "\" y=\"" << height - 20 << "\" font-size=\"11\">" << xmin << "</text>\n";
  out << "<text x=\"" << width - right << "\" y=\"" << height - 20 << "\" font-size=\"11\" text-anchor=\"end\">"
      << xmax << "</text>\n";
  out << "<text x=\"4\" y=\"" << top + 10 << "\" font-size=\"11\">" << (log_y ? "1e" : "") << ymax << "</text>\n";
  out << "<text x=\"4\" y=\"" << height - bottom << "\" font-size=\"11\">" << (log_y ? "1e" : "") << ymin
      << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    out << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < series[s].y.size() && i < x.size(); ++i) {
      if (usable(series[s].y[i])) out << px(x[i]) << ',' << py(series[s].y[i]) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - right - 160 << "\" y=\"" << top + 14 * (s + 1) << "\" font-size=\"12\" fill=\""
        << color << "\">" << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sgdnoise
