#include "frameexit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace frameexit {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 55.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<SvgSeries>& series,
                            bool log_x) {
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series) {
        for (auto [x, y] : s.points) {
            const double xv = log_x ? std::log10(x) : x;
            x_min = std::min(x_min, xv);
            x_max = std::max(x_max, xv);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (!(x_min < x_max)) { x_min -= 0.5; x_max += 0.5; }
    if (!(y_min < y_max)) { y_min -= 0.5; y_max += 0.5; }
    const double x_pad = 0.05 * (x_max - x_min);
    const double y_pad = 0.08 * (y_max - y_min);
    x_min -= x_pad; x_max += x_pad;
    y_min -= y_pad; y_max += y_pad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const auto px = [&](double x) {
        const double xv = log_x ? std::log10(x) : x;
        return kMarginLeft + (xv - x_min) / (x_max - x_min) * plot_w;
    };
    const auto py = [&](double y) {
        return kMarginTop + (y_max - y) / (y_max - y_min) * plot_h;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";

    // axes with 5 ticks each
    svg << "<g stroke=\"#444\" stroke-width=\"1\" font-size=\"11\" fill=\"#444\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = x_min + (x_max - x_min) * i / 5.0;
        const double fy = y_min + (y_max - y_min) * i / 5.0;
        const double gx = kMarginLeft + plot_w * i / 5.0;
        const double gy = kMarginTop + plot_h - plot_h * i / 5.0;
        svg << "<line x1=\"" << gx << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\"" << gx
            << "\" y2=\"" << kMarginTop + plot_h + 5 << "\"/>";
        svg << "<text x=\"" << gx << "\" y=\"" << kMarginTop + plot_h + 18
            << "\" text-anchor=\"middle\" stroke=\"none\">"
            << (log_x ? "1e" + num(fx) : num(fx)) << "</text>\n";
        svg << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << gy << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << gy << "\"/>";
        svg << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << gy + 4
            << "\" text-anchor=\"end\" stroke=\"none\">" << num(fy) << "</text>\n";
    }
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kMarginTop + plot_h << "\"/>";
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h << "\"/>\n";
    svg << "</g>\n";
    svg << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    svg << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";

    double legend_y = kMarginTop + 6.0;
    for (const auto& s : series) {
        if (s.draw_line && s.points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" points=\"";
            for (auto [x, y] : s.points) svg << num(px(x)) << ',' << num(py(y)) << ' ';
            svg << "\"/>\n";
        }
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const double r = i < s.marker_radius.size() ? s.marker_radius[i] : 3.0;
            if (r <= 0.0) continue;
            svg << "<circle cx=\"" << num(px(s.points[i].first)) << "\" cy=\""
                << num(py(s.points[i].second)) << "\" r=\"" << num(r) << "\" fill=\"" << s.color
                << "\" fill-opacity=\"0.75\"/>\n";
        }
        if (!s.label.empty()) {
            svg << "<circle cx=\"" << kMarginLeft + plot_w - 120 << "\" cy=\"" << legend_y
                << "\" r=\"4\" fill=\"" << s.color << "\"/>";
            svg << "<text x=\"" << kMarginLeft + plot_w - 110 << "\" y=\"" << legend_y + 4
                << "\" font-size=\"11\">" << s.label << "</text>\n";
            legend_y += 16.0;
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace frameexit
