// Copyright 2026 The natts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "natts/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "natts/tensor.hpp"

namespace natts {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 40.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Viridis-like ramp from dark blue to yellow.
std::string Color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double stops[][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                             {94, 201, 98}, {253, 231, 37}};
  const double pos = t * 4.0;
  const int i = std::min(3, static_cast<int>(pos));
  const double f = pos - i;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

void Frame(std::ostringstream& os, const std::string& title,
           const std::string& x_label, const std::string& y_label) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\">"
     << Escape(title) << "</text>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 6
     << "\" text-anchor=\"middle\">" << Escape(x_label) << "</text>\n";
  if (!y_label.empty()) {
    os << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 14 " << kHeight / 2 << ")\">" << Escape(y_label)
       << "</text>\n";
  }
}

}  // namespace

std::string HeatmapSvg(std::span<const double> values, std::size_t rows,
                       std::size_t cols, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  if (values.size() != rows * cols) {
    throw Error("heatmap: " + std::to_string(values.size()) +
                " values for a " + std::to_string(rows) + " x " +
                std::to_string(cols) + " grid");
  }
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    lo = hi = values[0];
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double cw = rows ? plot_w / rows : 0.0;
  const double ch = cols ? plot_h / cols : 0.0;

  std::ostringstream os;
  Frame(os, title, x_label, y_label);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double y = kTop + plot_h - (c + 1) * ch;
      os << "<rect x=\"" << Num(kLeft + r * cw) << "\" y=\"" << Num(y)
         << "\" width=\"" << Num(cw + 0.05) << "\" height=\"" << Num(ch + 0.05)
         << "\" fill=\"" << Color((values[r * cols + c] - lo) / span) << "\"/>\n";
    }
  }
  os << "<text x=\"" << kLeft << "\" y=\"" << kHeight - kBottom + 14 << "\">0</text>\n"
     << "<text x=\"" << kWidth - kRight << "\" y=\"" << kHeight - kBottom + 14
     << "\" text-anchor=\"end\">" << rows << "</text>\n"
     << "<text x=\"" << kWidth - kRight << "\" y=\"" << kTop - 4
     << "\" text-anchor=\"end\">range [" << Num(lo) << ", " << Num(hi)
     << "]</text>\n</svg>\n";
  return os.str();
}

std::string LineChartSvg(const std::vector<Series>& series,
                         const std::string& title, const std::string& x_label,
                         bool log_y) {
  auto transform = [&](double y) { return log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0.0);
  };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, transform(s.y[i]));
      y1 = std::max(y1, transform(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * plot_w; };
  auto py = [&](double y) {
    return kTop + plot_h - (transform(y) - y0) / (y1 - y0) * plot_h;
  };

  std::ostringstream os;
  Frame(os, title, x_label, log_y ? "log10" : "");
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#888\"/>\n";
  os << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 10
     << "\" text-anchor=\"end\">" << Num(y1) << "</text>\n"
     << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + plot_h
     << "\" text-anchor=\"end\">" << Num(y0) << "</text>\n"
     << "<text x=\"" << kLeft << "\" y=\"" << kTop + plot_h + 14 << "\">"
     << Num(x0) << "</text>\n"
     << "<text x=\"" << kLeft + plot_w << "\" y=\"" << kTop + plot_h + 14
     << "\" text-anchor=\"end\">" << Num(x1) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      os << Num(px(s.x[i])) << ',' << Num(py(s.y[i])) << ' ';
    }
    os << "\"/>\n<text x=\"" << kLeft + plot_w - 4 << "\" y=\""
       << kTop + 14 + 14 * k << "\" text-anchor=\"end\" fill=\"" << color << "\">"
       << Escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace natts
