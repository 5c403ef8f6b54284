#pragma once

#include <string>
#include <vector>

namespace frameexit {

// Minimal dependency-free SVG line/scatter plot, enough for the trade-off
// curve and watermelon figures.
struct SvgSeries {
    std::string label;
    std::string color = "#1f77b4";
    bool draw_line = true;
    std::vector<std::pair<double, double>> points;
    std::vector<double> marker_radius;  // optional, per point; default 3
};

std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<SvgSeries>& series,
                            bool log_x = false);

}  // namespace frameexit
