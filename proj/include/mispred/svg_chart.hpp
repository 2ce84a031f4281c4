#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mispred {

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as x when present
  std::vector<double> hi;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
  std::vector<ChartSeries> series;
  std::optional<double> reference;  // horizontal line
  std::string reference_label = "Bayes rate";
};

/// Self-contained SVG; output bytes depend only on the chart contents.
std::string render_svg(const LineChart& chart);

}  // namespace mispred
