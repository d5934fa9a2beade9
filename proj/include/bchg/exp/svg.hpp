#pragma once

#include <string>
#include <vector>

namespace bchg {

// One learning-curve series: per-iteration values for several seeds.
struct PlotSeries {
  std::string label;
  std::vector<int> iters;
  std::vector<std::vector<double>> per_seed;  // [seed][iteration index]
};

struct PlotOptions {
  std::string title;
  std::string x_label = "outer iteration";
  std::string y_label = "upper-level objective";
  bool trimmed = false;  // drop per-iteration min and max before the mean/std
  int width = 860;
  int height = 540;
};

// Mean line with a +-1 std band per series, written as a standalone SVG.
void emit_plot(const std::string& path, const std::vector<PlotSeries>& series,
               const PlotOptions& options);

// Aggregation used by the plot and by grid selection.
struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};
SeriesStats aggregate_series(const std::vector<std::vector<double>>& per_seed, bool trimmed);

}  // namespace bchg
