#include "bchg/exp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bchg/errors.hpp"

namespace bchg {

SeriesStats aggregate_series(const std::vector<std::vector<double>>& per_seed, bool trimmed) {
  if (per_seed.empty()) throw ConfigurationError("aggregate_series: no seeds");
  const size_t len = per_seed.front().size();
  for (const auto& s : per_seed) {
    if (s.size() != len) throw ConfigurationError("aggregate_series: mismatched series lengths");
  }
  SeriesStats stats;
  stats.mean.resize(len);
  stats.stddev.resize(len);
  for (size_t t = 0; t < len; ++t) {
    std::vector<double> vals;
    vals.reserve(per_seed.size());
    for (const auto& s : per_seed) vals.push_back(s[t]);
    if (trimmed && vals.size() > 2) {
      std::sort(vals.begin(), vals.end());
      vals.erase(vals.begin());
      vals.pop_back();
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    stats.mean[t] = mean;
    stats.stddev[t] = std::sqrt(var);
  }
  return stats;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Scale {
  double x0, x1, y0, y1;
  double px0, px1, py0, py1;
  double x(double v) const { return px0 + (v - x0) / (x1 - x0 + 1e-300) * (px1 - px0); }
  double y(double v) const { return py0 + (v - y0) / (y1 - y0 + 1e-300) * (py1 - py0); }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

void emit_plot(const std::string& path, const std::vector<PlotSeries>& series,
               const PlotOptions& options) {
  if (series.empty()) throw ConfigurationError("emit_plot: no series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  std::vector<SeriesStats> stats;
  for (const auto& s : series) {
    stats.push_back(aggregate_series(s.per_seed, options.trimmed));
    for (size_t t = 0; t < s.iters.size(); ++t) {
      x_min = std::min(x_min, static_cast<double>(s.iters[t]));
      x_max = std::max(x_max, static_cast<double>(s.iters[t]));
      y_min = std::min(y_min, stats.back().mean[t] - stats.back().stddev[t]);
      y_max = std::max(y_max, stats.back().mean[t] + stats.back().stddev[t]);
    }
  }
  if (y_min == y_max) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  Scale sc{x_min, x_max, y_min, y_max, 70.0, options.width - 20.0, options.height - 50.0, 20.0};

  std::ofstream out(path);
  if (!out) throw ConfigurationError("emit_plot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  out << "<line x1=\"" << sc.px0 << "\" y1=\"" << sc.py0 << "\" x2=\"" << sc.px1 << "\" y2=\""
      << sc.py0 << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << sc.px0 << "\" y1=\"" << sc.py0 << "\" x2=\"" << sc.px0 << "\" y2=\""
      << sc.py1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    out << "<text x=\"" << sc.x(xv) << "\" y=\"" << sc.py0 + 18 << "\" font-size=\"11\" "
        << "text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    out << "<text x=\"" << sc.px0 - 6 << "\" y=\"" << sc.y(yv) + 4 << "\" font-size=\"11\" "
        << "text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << (sc.px0 + sc.px1) / 2 << "\" y=\"" << options.height - 8
      << "\" font-size=\"12\" text-anchor=\"middle\">" << options.x_label << "</text>\n";
  out << "<text x=\"14\" y=\"" << (sc.py0 + sc.py1) / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (sc.py0 + sc.py1) / 2 << ")\">" << options.y_label << "</text>\n";
  if (!options.title.empty()) {
    out << "<text x=\"" << (sc.px0 + sc.px1) / 2
        << "\" y=\"14\" font-size=\"13\" text-anchor=\"middle\">" << options.title
        << "</text>\n";
  }

  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto& st = stats[k];
    const char* color = kPalette[k % 8];
    // band polygon: upper path then lower path reversed
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (size_t t = 0; t < s.iters.size(); ++t) {
      out << sc.x(s.iters[t]) << "," << sc.y(st.mean[t] + st.stddev[t]) << " ";
    }
    for (size_t t = s.iters.size(); t-- > 0;) {
      out << sc.x(s.iters[t]) << "," << sc.y(st.mean[t] - st.stddev[t]) << " ";
    }
    out << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (size_t t = 0; t < s.iters.size(); ++t) {
      out << sc.x(s.iters[t]) << "," << sc.y(st.mean[t]) << " ";
    }
    out << "\"/>\n";
    // legend
    const double ly = 26.0 + 16.0 * k;
    out << "<line x1=\"" << sc.px0 + 10 << "\" y1=\"" << ly << "\" x2=\"" << sc.px0 + 34
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << sc.px0 + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace bchg
