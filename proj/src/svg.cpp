#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "hcl/viz.hpp"

namespace hcl {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
                                    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173"};
constexpr int kWidth = 640;
constexpr int kHeight = 640;
constexpr double kMargin = 40.0;

std::string escape(const std::string& s) {
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

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Scale {
    double lo, hi, out_lo, out_hi;
    double operator()(double v) const {
        if (hi <= lo) return (out_lo + out_hi) / 2.0;
        return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
    }
};

}  // namespace

std::string render_scatter_svg(const std::vector<std::pair<double, double>>& points,
                               const std::vector<std::string>& labels, const std::string& title) {
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& [x, y] : points) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    const Scale sx{xmin, xmax, kMargin, kWidth - kMargin - 120.0};
    const Scale sy{ymin, ymax, kHeight - kMargin, kMargin};

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < points.size(); ++i)
        groups[i < labels.size() ? labels[i] : std::string()].push_back(i);
    const bool monochrome = groups.size() == 1 && groups.begin()->first.empty();

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kMargin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape(title) << "</text>\n";
    std::size_t color = 0;
    double legend_y = kMargin;
    for (const auto& [label, idx] : groups) {
        const std::string fill = monochrome ? "#444444" : kPalette[color++ % std::size(kPalette)];
        svg << "<g class=\"group\" data-label=\"" << escape(label) << "\" fill=\"" << fill
            << "\" fill-opacity=\"0.75\">\n";
        for (std::size_t i : idx)
            svg << "<circle cx=\"" << num(sx(points[i].first)) << "\" cy=\"" << num(sy(points[i].second))
                << "\" r=\"3\"/>\n";
        svg << "</g>\n";
        if (!monochrome) {
            svg << "<rect x=\"" << kWidth - 130 << "\" y=\"" << num(legend_y - 9) << "\" width=\"10\" height=\"10\" fill=\""
                << fill << "\"/><text x=\"" << kWidth - 115 << "\" y=\"" << num(legend_y)
                << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(label.empty() ? "(none)" : label)
                << "</text>\n";
            legend_y += 16.0;
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_line_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::vector<std::string>& x_labels, const std::string& title,
                            const std::string& y_label) {
    double xmin = INFINITY, xmax = -INFINITY, ymin = 0.0, ymax = -INFINITY;
    for (double x : xs) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
    }
    for (double y : ys) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    const Scale sx{xmin, xmax, kMargin + 30.0, kWidth - kMargin};
    const Scale sy{ymin, ymax, kHeight - kMargin - 20.0, kMargin};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kMargin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape(title) << "</text>\n";
    svg << "<text x=\"12\" y=\"" << kHeight / 2 << "\" font-family=\"sans-serif\" font-size=\"11\" "
        << "transform=\"rotate(-90 12 " << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) svg << num(sx(xs[i])) << ',' << num(sy(ys[i])) << ' ';
    svg << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        svg << "<text class=\"marker\" x=\"" << num(sx(xs[i]) - 5) << "\" y=\"" << num(sy(ys[i]) + 5)
            << "\" font-size=\"14\" fill=\"#d62728\">&#9733;</text>\n";
        if (i < x_labels.size())
            svg << "<text x=\"" << num(sx(xs[i]) - 10) << "\" y=\"" << kHeight - kMargin + 5
                << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(x_labels[i]) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace hcl
