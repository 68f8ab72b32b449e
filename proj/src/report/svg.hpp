// Copyright 2026 The capsyolo Authors
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

#pragma once

#include <string>
#include <vector>

namespace capsyolo::report {

struct Series {
    std::string name;
    std::vector<double> y;  // NaN entries are skipped
    std::string color;
};

// Vertical bar chart with one labelled bar per category.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

// Line chart over x = 1..n for each series.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series);

// Stacks several SVG documents vertically into one.
std::string stack_svg(const std::vector<std::string>& parts, int part_height, int width);

}  // namespace capsyolo::report
