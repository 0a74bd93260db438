#include "featstat/svg_chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace featstat {
namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 64.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 48.0;

std::string fmt(const char* pattern, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range value_range(const std::vector<std::pair<double, double>>& points, bool use_x) {
  if (points.empty()) return {};
  Range r{use_x ? points.front().first : points.front().second,
          use_x ? points.front().first : points.front().second};
  for (const auto& [x, y] : points) {
    const double v = use_x ? x : y;
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  if (r.hi == r.lo) {
    r.lo -= 0.5;
    r.hi += 0.5;
  }
  return r;
}

}  // namespace

std::string render_svg(const TwinAxisChart& chart) {
  const double w = chart.width;
  const double h = chart.height;
  const double plot_w = w - kMarginLeft - kMarginRight;
  const double plot_h = h - kMarginTop - kMarginBottom;

  std::vector<std::pair<double, double>> all_x = chart.left.points;
  if (chart.right) all_x.insert(all_x.end(), chart.right->points.begin(), chart.right->points.end());
  Range xr = value_range(all_x, true);
  if (all_x.empty()) xr = {0.0, 1.0};

  const auto sx = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  const auto sy = [&](const Range& r, double y) {
    return kMarginTop + plot_h - (y - r.lo) / (r.hi - r.lo) * plot_h;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\""
      << chart.height << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << chart.width << "\" height=\"" << chart.height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt("%.1f", w / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(chart.title) << "</text>\n";

  // Frame.
  svg << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  svg << "<line x1=\"" << fmt("%.2f", kMarginLeft) << "\" y1=\"" << fmt("%.2f", kMarginTop + plot_h)
      << "\" x2=\"" << fmt("%.2f", kMarginLeft + plot_w) << "\" y2=\""
      << fmt("%.2f", kMarginTop + plot_h) << "\"/>\n";
  svg << "<line x1=\"" << fmt("%.2f", kMarginLeft) << "\" y1=\"" << fmt("%.2f", kMarginTop)
      << "\" x2=\"" << fmt("%.2f", kMarginLeft) << "\" y2=\"" << fmt("%.2f", kMarginTop + plot_h)
      << "\"/>\n";
  if (chart.right) {
    svg << "<line x1=\"" << fmt("%.2f", kMarginLeft + plot_w) << "\" y1=\""
        << fmt("%.2f", kMarginTop) << "\" x2=\"" << fmt("%.2f", kMarginLeft + plot_w)
        << "\" y2=\"" << fmt("%.2f", kMarginTop + plot_h) << "\"/>\n";
  }
  svg << "</g>\n";

  // X ticks on integer epochs, always including both ends.
  svg << "<g class=\"x-ticks\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">\n";
  const long first = std::lround(std::ceil(xr.lo));
  const long last = std::lround(std::floor(xr.hi));
  const long span = std::max(1L, last - first);
  const long step = span <= 20 ? 1 : static_cast<long>(std::ceil(span / 10.0));
  for (long x = first; x <= last; x += step) {
    const bool near_end = x != last && last - x < step;
    if (near_end) continue;
    svg << "<text x=\"" << fmt("%.2f", sx(static_cast<double>(x))) << "\" y=\""
        << fmt("%.2f", kMarginTop + plot_h + 16) << "\">" << x << "</text>\n";
  }
  if ((last - first) % step != 0) {
    svg << "<text x=\"" << fmt("%.2f", sx(static_cast<double>(last))) << "\" y=\""
        << fmt("%.2f", kMarginTop + plot_h + 16) << "\">" << last << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << fmt("%.1f", kMarginLeft + plot_w / 2) << "\" y=\"" << fmt("%.1f", h - 8)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape(chart.x_label) << "</text>\n";

  const auto y_axis = [&](const ChartSeries& series, const Range& r, bool right) {
    const double x = right ? kMarginLeft + plot_w + 6 : kMarginLeft - 6;
    svg << "<g class=\"y-ticks-" << (right ? "right" : "left")
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\""
        << (right ? "start" : "end") << "\" fill=\"" << series.color << "\">\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = r.lo + (r.hi - r.lo) * i / 4.0;
      svg << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", sy(r, v) + 3) << "\">"
          << fmt("%.3g", v) << "</text>\n";
    }
    svg << "</g>\n";
    const double lx = right ? w - 14 : 14;
    const double ly = kMarginTop + plot_h / 2;
    svg << "<text x=\"" << fmt("%.1f", lx) << "\" y=\"" << fmt("%.1f", ly)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
        << series.color << "\" transform=\"rotate(" << (right ? 90 : -90) << ' '
        << fmt("%.1f", lx) << ' ' << fmt("%.1f", ly) << ")\">" << escape(series.label)
        << "</text>\n";
  };

  const auto polyline = [&](const ChartSeries& series, const Range& r, const char* cls) {
    svg << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << series.color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series.points.size(); ++i) {
      if (i) svg << ' ';
      svg << fmt("%.2f", sx(series.points[i].first)) << ','
          << fmt("%.2f", sy(r, series.points[i].second));
    }
    svg << "\"/>\n";
  };

  const Range left_range = value_range(chart.left.points, false);
  y_axis(chart.left, left_range, false);
  polyline(chart.left, left_range, "series-left");
  if (chart.right) {
    const Range right_range = value_range(chart.right->points, false);
    y_axis(*chart.right, right_range, true);
    polyline(*chart.right, right_range, "series-right");
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace featstat
