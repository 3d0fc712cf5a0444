#include "railscope/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace railscope {

namespace {

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const PlotSpec& spec, int width, int height)
{
    constexpr int left = 70, right = 20, top = 30, bottom = 45;
    const int pw = width - left - right;
    const int ph = height - top - bottom;

    auto ty = [&](double y) { return spec.log_y ? std::log10(std::max(y, 1e-300)) : y; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const PlotSeries& s : spec.series) {
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    }
    if (!(x1 > x0)) { x0 = 0; x1 = 1; }
    if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (ty(y) - y0) / (y1 - y0) * ph; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(spec.title) + "</text>\n";
    svg += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top) + "\" width=\"" + std::to_string(pw) +
           "\" height=\"" + std::to_string(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fx = x0 + (x1 - x0) * t / 4.0;
        const double fy = y0 + (y1 - y0) * t / 4.0;
        const double yl = spec.log_y ? std::pow(10.0, fy) : fy;
        svg += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + std::to_string(top + ph + 15) + "\" text-anchor=\"middle\">" +
               fmt(fx) + "</text>\n";
        svg += "<text x=\"" + std::to_string(left - 5) + "\" y=\"" + fmt(top + ph - (fy - y0) / (y1 - y0) * ph + 4) +
               "\" text-anchor=\"end\">" + fmt(yl) + "</text>\n";
    }
    svg += "<text x=\"" + std::to_string(left + pw / 2) + "\" y=\"" + std::to_string(height - 8) +
           "\" text-anchor=\"middle\">" + escape(spec.x_label) + "</text>\n";
    svg += "<text x=\"14\" y=\"" + std::to_string(top + ph / 2) + "\" transform=\"rotate(-90 14 " +
           std::to_string(top + ph / 2) + ")\" text-anchor=\"middle\">" + escape(spec.y_label) + "</text>\n";

    for (const double m : spec.markers) {
        if (m < x0 || m > x1) continue;
        svg += "<line x1=\"" + fmt(px(m)) + "\" x2=\"" + fmt(px(m)) + "\" y1=\"" + std::to_string(top) + "\" y2=\"" +
               std::to_string(top + ph) + "\" stroke=\"#d62728\" stroke-opacity=\"0.3\"/>\n";
    }

    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        const PlotSeries& s = spec.series[si];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        std::string points;
        // Min/max per pixel column keeps narrow spikes visible.
        int column = -1;
        double lo = 0, hi = 0, last = 0;
        auto flush = [&] {
            if (column < 0) return;
            points += fmt(left + column) + "," + fmt(py(hi)) + " ";
            if (lo != hi) points += fmt(left + column) + "," + fmt(py(lo)) + " ";
            if (last != lo) points += fmt(left + column) + "," + fmt(py(last)) + " ";
        };
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            const int c = static_cast<int>(px(s.x[k])) - left;
            if (c != column) {
                flush();
                column = c;
                lo = hi = s.y[k];
            }
            lo = std::min(lo, s.y[k]);
            hi = std::max(hi, s.y[k]);
            last = s.y[k];
        }
        flush();
        svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1\" points=\"" + points + "\"/>\n";
        svg += "<text x=\"" + std::to_string(left + 8) + "\" y=\"" + std::to_string(top + 14 + 14 * static_cast<int>(si)) +
               "\" fill=\"" + s.color + "\">" + escape(s.label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace railscope
