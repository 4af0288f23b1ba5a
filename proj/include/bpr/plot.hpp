#ifndef BPR_PLOT_HPP
#define BPR_PLOT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bpr/core.hpp"

namespace bpr::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool bars = false;  // bar chart of the first series; x values become category labels
};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Self-contained SVG. Non-finite points are skipped; output bytes depend
/// only on the chart contents.
inline std::string render(const Chart& chart) {
  if (chart.series.empty()) throw ConfigError("plot: no series");
  for (const auto& s : chart.series) {
    if (s.x.empty() || s.x.size() != s.y.size()) throw ConfigError("plot: series '" + s.label + "' is empty or ragged");
  }
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double W = 640, H = 400, left = 70, right = 160, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (chart.bars) ymin = std::min(ymin, 0.0), ymax = std::max(ymax, 0.0);
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto X = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
       "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(chart.title) +
       "</text>\n";
  o += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    o += "<text x=\"" + num(left - 6) + "\" y=\"" + num(Y(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) + "</text>\n";
  }
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(H - 10) + "\" text-anchor=\"middle\">" +
       escape(chart.x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(top + ph / 2) + ")\">" + escape(chart.y_label) + "</text>\n";

  if (chart.bars) {
    const auto& s = chart.series.front();
    const double slot = pw / s.x.size();
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double cx = left + slot * (i + 0.5);
      o += "<text x=\"" + num(cx) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"middle\">" + tick(s.x[i]) +
           "</text>\n";
      if (!std::isfinite(s.y[i])) continue;
      const double y0 = Y(0.0), y1 = Y(s.y[i]);
      o += "<rect class=\"bar\" x=\"" + num(cx - 0.3 * slot) + "\" y=\"" + num(std::min(y0, y1)) + "\" width=\"" +
           num(0.6 * slot) + "\" height=\"" + num(std::abs(y1 - y0)) + "\" fill=\"" + colors[0] + "\"/>\n";
    }
  } else {
    for (int k = 0; k <= 4; ++k) {
      const double xv = xmin + (xmax - xmin) * k / 4.0;
      o += "<text x=\"" + num(X(xv)) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"middle\">" + tick(xv) +
           "</text>\n";
    }
    for (std::size_t si = 0; si < chart.series.size(); ++si) {
      const auto& s = chart.series[si];
      const char* color = colors[si % 6];
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (!pts.empty()) pts += ' ';
        pts += num(X(s.x[i])) + "," + num(Y(s.y[i]));
      }
      o += "<polyline class=\"series\" fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
      for (std::size_t i = 0; i < s.x.size() && s.x.size() <= 50; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o += "<circle class=\"marker\" cx=\"" + num(X(s.x[i])) + "\" cy=\"" + num(Y(s.y[i])) + "\" r=\"3\" fill=\"" +
             color + "\"/>\n";
      }
    }
  }
  for (std::size_t si = 0; si < chart.series.size() && !(chart.bars && si > 0); ++si) {
    const double ly = top + 14 + 18 * si;
    o += "<rect x=\"" + num(left + pw + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"10\" fill=\"" +
         colors[si % 6] + "\"/>\n";
    o += "<text class=\"label\" x=\"" + num(left + pw + 30) + "\" y=\"" + num(ly) + "\">" +
         escape(chart.series[si].label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

inline void emit(const Chart& chart, const std::string& path) {
  const std::string svg = render(chart);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out << svg;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace bpr::plot

#endif  // BPR_PLOT_HPP
