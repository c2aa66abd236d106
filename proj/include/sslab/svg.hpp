// Self-contained SVG line chart for sweep results: x = sweep value,
// y = seed-mean kNN accuracy with min/max whiskers. No plotting deps;
// identical input yields byte-identical output.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sslab/results.hpp"

namespace sslab {
namespace detail {

struct PlotPoint {
    std::string label;
    double mean = 0, lo = 0, hi = 0;
};

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// Renders rows (final-epoch rows only, status "ok") grouped by sweep value.
// Numeric values sort numerically; symbolic values keep first-seen order.
inline std::string render_sweep_svg(const std::vector<SweepRow>& rows, const std::string& title = "") {
    // Keep only the last epoch per (value, seed).
    std::map<std::pair<std::string, std::uint64_t>, SweepRow> last;
    for (const auto& r : rows) {
        if (r.status != "ok") continue;
        auto key = std::make_pair(r.value, r.seed);
        auto it = last.find(key);
        if (it == last.end() || r.epoch >= it->second.epoch) last[key] = r;
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> byval;
    for (const auto& r : rows) {
        if (byval.find(r.value) == byval.end()) {
            byval[r.value] = {};
            order.push_back(r.value);
        }
    }
    for (const auto& [key, r] : last) byval[key.first].push_back(r.knn_accuracy);

    const bool numeric = std::all_of(order.begin(), order.end(), [](const std::string& s) {
        char* end = nullptr;
        std::strtod(s.c_str(), &end);
        return end && *end == '\0' && end != s.c_str();
    });
    if (numeric)
        std::sort(order.begin(), order.end(),
                  [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });

    std::vector<detail::PlotPoint> pts;
    for (const auto& v : order) {
        const auto& accs = byval[v];
        if (accs.empty()) continue;
        detail::PlotPoint p;
        p.label = v;
        p.lo = *std::min_element(accs.begin(), accs.end());
        p.hi = *std::max_element(accs.begin(), accs.end());
        for (const double a : accs) p.mean += a;
        p.mean /= static_cast<double>(accs.size());
        pts.push_back(p);
    }
    if (pts.empty()) throw IngestionError("render_sweep_svg: no plottable rows");

    const int W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double ymin = 1.0, ymax = 0.0;
    for (const auto& p : pts) {
        ymin = std::min(ymin, p.lo);
        ymax = std::max(ymax, p.hi);
    }
    ymin = std::max(0.0, ymin - 0.05);
    ymax = std::min(1.0, ymax + 0.05);
    if (ymax - ymin < 0.1) ymax = std::min(1.0, ymin + 0.1);

    auto xpos = [&](size_t i) {
        if (pts.size() == 1) return ml + (W - ml - mr) / 2.0;
        return ml + static_cast<double>(i) * (W - ml - mr) / (pts.size() - 1);
    };
    auto ypos = [&](double v) { return mt + (ymax - v) / (ymax - ymin) * (H - mt - mb); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (!title.empty())
        s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"15\">" << title << "</text>\n";
    // Axes.
    s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    // Y ticks.
    for (int t = 0; t <= 4; ++t) {
        const double v = ymin + t * (ymax - ymin) / 4.0;
        const double y = ypos(v);
        s << "<line x1=\"" << ml - 4 << "\" y1=\"" << detail::fmt2(y) << "\" x2=\"" << ml << "\" y2=\""
          << detail::fmt2(y) << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt2(y + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt2(v)
          << "</text>\n";
    }
    // X ticks, one per sweep value.
    for (size_t i = 0; i < pts.size(); ++i) {
        const double x = xpos(i);
        s << "<line x1=\"" << detail::fmt2(x) << "\" y1=\"" << H - mb << "\" x2=\"" << detail::fmt2(x)
          << "\" y2=\"" << H - mb + 4 << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << detail::fmt2(x) << "\" y=\"" << H - mb + 18
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << pts[i].label
          << "</text>\n";
    }
    s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">sweep value</text>\n";
    s << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (mt + H - mb) / 2 << ")\">kNN accuracy</text>\n";
    // Min/max whiskers.
    for (size_t i = 0; i < pts.size(); ++i) {
        const double x = xpos(i);
        s << "<line x1=\"" << detail::fmt2(x) << "\" y1=\"" << detail::fmt2(ypos(pts[i].lo)) << "\" x2=\""
          << detail::fmt2(x) << "\" y2=\"" << detail::fmt2(ypos(pts[i].hi))
          << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
    }
    // Mean polyline + markers.
    s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i)
        s << detail::fmt2(xpos(i)) << ',' << detail::fmt2(ypos(pts[i].mean)) << (i + 1 < pts.size() ? " " : "");
    s << "\"/>\n";
    for (size_t i = 0; i < pts.size(); ++i)
        s << "<circle cx=\"" << detail::fmt2(xpos(i)) << "\" cy=\"" << detail::fmt2(ypos(pts[i].mean))
          << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace sslab
