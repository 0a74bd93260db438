#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace featstat {

struct ChartSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  ///< (epoch, value)
};

/// Line chart over epochs with an optional second series on its own right-hand axis.
struct TwinAxisChart {
  std::string title;
  std::string x_label = "epoch";
  ChartSeries left;
  std::optional<ChartSeries> right;
  int width = 640;
  int height = 360;
};

std::string render_svg(const TwinAxisChart& chart);

}  // namespace featstat
