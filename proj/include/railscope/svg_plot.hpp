#pragma once

#include <span>
#include <string>
#include <vector>

namespace railscope {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    std::vector<PlotSeries> series;
    // Vertical markers (x positions), e.g. detected events.
    std::vector<double> markers;
};

/// Minimal standalone SVG line plot. Long series are reduced to min/max
/// pairs per horizontal pixel column.
std::string render_svg(const PlotSpec& spec, int width = 960, int height = 420);

}  // namespace railscope
