// Copyright 2026 The qwdqpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qwdqpt/floquet.hpp"

namespace qwdqpt::svg {

/// A line (or point set, with optional asymmetric bars) in data units.
/// Non-finite y values break the line; an empty label keeps it off the legend.
struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err_plus;
    std::vector<double> err_minus;
    bool points = false;
};

struct Panel {
    std::string title;
    std::string xlabel = "t";
    std::string ylabel;
    std::vector<Series> series;
    std::vector<double> markers;  // vertical dashed lines
};

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return p;
}

namespace detail {

inline std::string num(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Roughly five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return out;
}

inline std::string tick_label(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

struct Box {
    double left, top, width, height;
    double x0, x1, y0, y1;
    double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
    double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

inline void axes(std::ostream& os, const Box& b, const Panel& p) {
    os << "<rect x=\"" << num(b.left) << "\" y=\"" << num(b.top) << "\" width=\"" << num(b.width) << "\" height=\""
       << num(b.height) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (double v : ticks(b.x0, b.x1)) {
        os << "<line x1=\"" << num(b.px(v)) << "\" y1=\"" << num(b.top + b.height) << "\" x2=\"" << num(b.px(v))
           << "\" y2=\"" << num(b.top + b.height + 4) << "\" stroke=\"#000\"/>\n";
        os << "<text x=\"" << num(b.px(v)) << "\" y=\"" << num(b.top + b.height + 16)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
    }
    for (double v : ticks(b.y0, b.y1)) {
        os << "<line x1=\"" << num(b.left - 4) << "\" y1=\"" << num(b.py(v)) << "\" x2=\"" << num(b.left) << "\" y2=\""
           << num(b.py(v)) << "\" stroke=\"#000\"/>\n";
        os << "<text x=\"" << num(b.left - 7) << "\" y=\"" << num(b.py(v) + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
    }
    os << "<text x=\"" << num(b.left + b.width / 2) << "\" y=\"" << num(b.top - 8)
       << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(p.title) << "</text>\n";
    os << "<text x=\"" << num(b.left + b.width / 2) << "\" y=\"" << num(b.top + b.height + 32)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(p.xlabel) << "</text>\n";
    os << "<text x=\"" << num(b.left - 44) << "\" y=\"" << num(b.top + b.height / 2) << "\" font-size=\"12\" text-anchor=\"middle\""
       << " transform=\"rotate(-90 " << num(b.left - 44) << ' ' << num(b.top + b.height / 2) << ")\">" << escape(p.ylabel)
       << "</text>\n";
}

inline void series(std::ostream& os, const Box& b, const Series& s) {
    auto inside = [&](double y) { return std::isfinite(y); };
    if (!s.points) {
        std::string path;
        bool pen = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!inside(s.y[i])) {
                pen = false;
                continue;
            }
            const double y = std::clamp(s.y[i], b.y0, b.y1);
            path += (pen ? " L" : " M") + num(b.px(s.x[i])) + ' ' + num(b.py(y));
            pen = true;
        }
        if (!path.empty())
            os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n";
        return;
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!inside(s.y[i])) continue;
        const double cx = b.px(s.x[i]), cy = b.py(std::clamp(s.y[i], b.y0, b.y1));
        if (i < s.err_plus.size() && i < s.err_minus.size()) {
            const double hi = std::clamp(s.y[i] + s.err_plus[i], b.y0, b.y1);
            const double lo = std::clamp(s.y[i] - s.err_minus[i], b.y0, b.y1);
            os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(b.py(hi)) << "\" x2=\"" << num(cx) << "\" y2=\""
               << num(b.py(lo)) << "\" stroke=\"" << s.color << "\"/>\n";
        }
        os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    }
}

}  // namespace detail

/// Stacked panels sharing the x axis range of their own data.
inline void write_panels(std::ostream& os, const std::vector<Panel>& panels, double width = 640.0,
                         double panel_height = 240.0) {
    const double left = 70, right = 140, top = 30, gap = 60;
    const double height = static_cast<double>(panels.size()) * (panel_height + gap) + top;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(width) << "\" height=\"" << detail::num(height)
       << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const auto& p = panels[pi];
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
        for (const auto& s : p.series)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                x0 = std::min(x0, s.x[i]);
                x1 = std::max(x1, s.x[i]);
                if (!std::isfinite(s.y[i])) continue;
                const double up = i < s.err_plus.size() ? s.err_plus[i] : 0.0;
                const double dn = i < s.err_minus.size() ? s.err_minus[i] : 0.0;
                y0 = std::min(y0, s.y[i] - dn);
                y1 = std::max(y1, s.y[i] + up);
            }
        if (!std::isfinite(x0) || x1 <= x0) {
            x0 = 0.0;
            x1 = 1.0;
        }
        if (!std::isfinite(y0) || y1 - y0 < 1e-9) {
            const double c = std::isfinite(y0) ? y0 : 0.0;
            y0 = c - 1.0;
            y1 = c + 1.0;
        }
        const double pad = 0.06 * (y1 - y0);
        detail::Box box{left, top + static_cast<double>(pi) * (panel_height + gap), width - left - right, panel_height,
                        x0, x1, y0 - pad, y1 + pad};
        detail::axes(os, box, p);
        for (double m : p.markers) {
            if (m < x0 || m > x1) continue;
            os << "<line x1=\"" << detail::num(box.px(m)) << "\" y1=\"" << detail::num(box.top) << "\" x2=\""
               << detail::num(box.px(m)) << "\" y2=\"" << detail::num(box.top + box.height)
               << "\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
        }
        std::size_t row = 0;
        for (std::size_t si = 0; si < p.series.size(); ++si) {
            detail::series(os, box, p.series[si]);
            if (p.series[si].label.empty()) continue;
            const double ly = box.top + 14.0 + 16.0 * static_cast<double>(row++);
            os << "<rect x=\"" << detail::num(box.left + box.width + 10) << "\" y=\"" << detail::num(ly - 8)
               << "\" width=\"10\" height=\"10\" fill=\"" << p.series[si].color << "\"/>\n";
            os << "<text x=\"" << detail::num(box.left + box.width + 25) << "\" y=\"" << detail::num(ly + 1)
               << "\" font-size=\"11\">" << detail::escape(p.series[si].label) << "</text>\n";
        }
    }
    os << "</svg>\n";
}

/// Winding-number map of a phase-diagram scan; boundary cells are grey and
/// PT-broken cells hatched dark.
inline void write_phase_diagram(std::ostream& os, const std::vector<PhaseDiagramCell>& cells, std::size_t resolution,
                                const std::string& title) {
    const double cell = std::max(2.0, 480.0 / static_cast<double>(resolution));
    const double side = cell * static_cast<double>(resolution);
    const double left = 60, top = 30;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(left + side + 130) << "\" height=\""
       << detail::num(top + side + 50) << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    auto color = [](const PhaseDiagramCell& c) -> std::string {
        if (c.pt_status == PtStatus::broken) return "#333333";
        if (!c.winding) return "#bbbbbb";
        switch (*c.winding) {
            case -2: return "#2166ac";
            case -1: return "#92c5de";
            case 0: return "#f7f7f7";
            case 1: return "#f4a582";
            case 2: return "#b2182b";
            default: return "#ffff00";
        }
    };
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double col = static_cast<double>(i / resolution), row = static_cast<double>(i % resolution);
        os << "<rect x=\"" << detail::num(left + col * cell) << "\" y=\"" << detail::num(top + side - (row + 1) * cell)
           << "\" width=\"" << detail::num(cell) << "\" height=\"" << detail::num(cell) << "\" fill=\"" << color(cells[i])
           << "\"/>\n";
    }
    os << "<rect x=\"" << detail::num(left) << "\" y=\"" << detail::num(top) << "\" width=\"" << detail::num(side)
       << "\" height=\"" << detail::num(side) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    os << "<text x=\"" << detail::num(left + side / 2) << "\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">"
       << detail::escape(title) << "</text>\n";
    os << "<text x=\"" << detail::num(left + side / 2) << "\" y=\"" << detail::num(top + side + 30)
       << "\" font-size=\"12\" text-anchor=\"middle\">theta1</text>\n";
    os << "<text x=\"20\" y=\"" << detail::num(top + side / 2) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
       << detail::num(top + side / 2) << ")\">theta2</text>\n";
    const std::vector<std::pair<std::string, std::string>> legend{{"#2166ac", "nu = -2"}, {"#92c5de", "nu = -1"},
                                                                  {"#f7f7f7", "nu = 0"},  {"#f4a582", "nu = 1"},
                                                                  {"#b2182b", "nu = 2"},  {"#bbbbbb", "gap closing"},
                                                                  {"#333333", "PT broken"}};
    for (std::size_t i = 0; i < legend.size(); ++i) {
        const double y = top + 10 + 18.0 * static_cast<double>(i);
        os << "<rect x=\"" << detail::num(left + side + 12) << "\" y=\"" << detail::num(y) << "\" width=\"12\" height=\"12\" fill=\""
           << legend[i].first << "\" stroke=\"#000\"/>\n";
        os << "<text x=\"" << detail::num(left + side + 30) << "\" y=\"" << detail::num(y + 10) << "\" font-size=\"11\">"
           << legend[i].second << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace qwdqpt::svg
