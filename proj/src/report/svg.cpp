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

#include "report/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace capsyolo::report {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 360;
constexpr int kLeft = 60, kRight = 20, kTop = 40, kBottom = 90;

std::string esc(const std::string& s)
{
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

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void header(std::ostringstream& o, const std::string& title)
{
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
      << "</text>\n";
}

void axes(std::ostringstream& o, double y_max)
{
    const int x0 = kLeft, y0 = kHeight - kBottom, x1 = kWidth - kRight;
    o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << kTop << "\" x2=\"" << x0 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = y_max * t / 4.0;
        const double y = y0 - (y0 - kTop) * t / 4.0;
        o << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values)
{
    std::ostringstream o;
    header(o, title);
    double y_max = 0.0;
    for (double v : values) y_max = std::max(y_max, v);
    if (y_max <= 0.0) y_max = 1.0;
    axes(o, y_max);
    const int y0 = kHeight - kBottom;
    const double slot = static_cast<double>(kWidth - kLeft - kRight) / std::max<std::size_t>(1, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double h = (y0 - kTop) * values[i] / y_max;
        const double x = kLeft + slot * i + slot * 0.15;
        o << "<rect x=\"" << num(x) << "\" y=\"" << num(y0 - h) << "\" width=\"" << num(slot * 0.7) << "\" height=\""
          << num(h) << "\" fill=\"#4a7f3b\"/>\n"
          << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(y0 - h - 4) << "\" text-anchor=\"middle\">"
          << num(values[i]) << "</text>\n";
        const double lx = x + slot * 0.35;
        o << "<text transform=\"translate(" << num(lx) << "," << y0 + 10 << ") rotate(40)\">"
          << esc(i < labels.size() ? labels[i] : "") << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series)
{
    std::ostringstream o;
    header(o, title);
    double y_max = 0.0;
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.y.size());
        for (double v : s.y)
            if (std::isfinite(v)) y_max = std::max(y_max, v);
    }
    if (y_max <= 0.0) y_max = 1.0;
    axes(o, y_max);
    const int y0 = kHeight - kBottom;
    const double span = static_cast<double>(kWidth - kLeft - kRight);
    auto px = [&](std::size_t i) { return kLeft + (n > 1 ? span * i / (n - 1) : span / 2); };
    auto py = [&](double v) { return y0 - (y0 - kTop) * v / y_max; };

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i)
            if (std::isfinite(s.y[i])) o << num(px(i)) << "," << num(py(s.y[i])) << " ";
        o << "\"/>\n";
        const int ly = kHeight - kBottom + 40 + static_cast<int>(si) * 14;
        o << "<rect x=\"" << kLeft << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << s.color
          << "\"/><text x=\"" << kLeft + 16 << "\" y=\"" << ly << "\">" << esc(s.name) << "</text>\n";
    }
    o << "<text x=\"" << kWidth / 2 << "\" y=\"" << y0 + 28 << "\" text-anchor=\"middle\">" << esc(x_label) << " (1.."
      << n << ")</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string stack_svg(const std::vector<std::string>& parts, int part_height, int width)
{
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << part_height * static_cast<int>(parts.size()) << "\">\n";
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::string body = parts[i];
        const auto open = body.find("<svg");
        if (open != std::string::npos) body.replace(open, 4, "<svg y=\"" + std::to_string(part_height * i) + "\"");
        o << body;
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace capsyolo::report
