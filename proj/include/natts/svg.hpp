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


// Minimal SVG plots: heatmaps for spectrograms and alignment weights, line
// charts for loss curves.

#ifndef NATTS_SVG_HPP_
#define NATTS_SVG_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace natts {

/// `values` is row-major rows x cols. Rows run along the x axis (time) and
/// columns up the y axis, which is how spectrograms are usually drawn.
std::string HeatmapSvg(std::span<const double> values, std::size_t rows,
                       std::size_t cols, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Non-finite points are skipped. log_y plots log10 of positive values.
std::string LineChartSvg(const std::vector<Series>& series,
                         const std::string& title, const std::string& x_label,
                         bool log_y = false);

void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace natts

#endif  // NATTS_SVG_HPP_
