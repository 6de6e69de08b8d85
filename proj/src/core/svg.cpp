// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/tensor.hpp"

namespace codemae::svg {

namespace {
constexpr double kW = 640, kH = 420;
constexpr double kL = 70, kR = 20, kT = 40, kB = 50;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace

void write_chart(const std::string& path, const std::string& title,
                 const std::string& x_label, const std::string& y_label,
                 const std::vector<Series>& series, bool log_y) {
  std::ofstream f(path);
  if (!f) numcore::fail(numcore::ErrorKind::io, "cannot write SVG: " + path);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double y = log_y ? std::log10(std::max(s.y[i], 1e-12)) : s.y[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;

  auto px = [&](double x) {
    return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR);
  };
  auto py = [&](double y) {
    if (log_y) y = std::log10(std::max(y, 1e-12));
    return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB);
  };

  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
    << "\" height=\"" << kH << "\" font-family=\"sans-serif\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" "
       "font-size=\"15\">" << title << "</text>\n";
  // axes
  f << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR
    << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL
    << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = xmin + (xmax - xmin) * i / 4.0;
    double fy = ymin + (ymax - ymin) * i / 4.0;
    f << "<text x=\"" << px(fx) << "\" y=\"" << kH - kB + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(fx)
      << "</text>\n";
    f << "<text x=\"" << kL - 6 << "\" y=\""
      << kH - kB - (kH - kT - kB) * i / 4.0 + 4
      << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt(log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  f << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label
    << "</text>\n";
  f << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2
    << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
    << (kT + kH - kB) / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 6];
    if (s.scatter) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        f << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\""
          << fmt(py(s.y[i])) << "\" r=\"2.4\" fill=\"" << color
          << "\" fill-opacity=\"0.6\"/>\n";
    } else if (!s.x.empty()) {
      f << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.6\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        f << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
      f << "\"/>\n";
    }
    f << "<text x=\"" << kW - kR - 6 << "\" y=\"" << kT + 16 + 16 * k
      << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
      << s.label << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace codemae::svg
