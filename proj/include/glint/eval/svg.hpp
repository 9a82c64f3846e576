#pragma once

// Minimal SVG line-plot writer for batch-emitted analysis figures.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "glint/core/error.hpp"

namespace glint::eval {

struct PlotSeries {
    std::vector<double> x, y, yerr;  // yerr optional (empty = none)
    std::string color = "#1f6fb2";
};

inline void write_svg_plot(const std::string& path, const PlotSeries& s,
                           const std::string& title,
                           const std::string& xlabel,
                           const std::string& ylabel) {
    if (s.x.empty() || s.x.size() != s.y.size())
        throw InputError("svg plot: empty or mismatched series");
    const double W = 640, H = 440, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = *std::min_element(s.x.begin(), s.x.end());
    double xmax = *std::max_element(s.x.begin(), s.x.end());
    double ymin = *std::min_element(s.y.begin(), s.y.end());
    double ymax = *std::max_element(s.y.begin(), s.y.end());
    if (!s.yerr.empty())
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            ymin = std::min(ymin, s.y[i] - s.yerr[i]);
            ymax = std::max(ymax, s.y[i] + s.yerr[i]);
        }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    auto px = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
    };
    auto py = [&](double y) {
        return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-size=\"16\">" << title << "</text>\n"
        << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
        << "</text>\n"
        << "<text x=\"16\" y=\"" << H / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 "
           "16 " << H / 2 << ")\">" << ylabel << "</text>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";

    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
        out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
            << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        if (!s.yerr.empty())
            out << "<line x1=\"" << px(s.x[i]) << "\" y1=\""
                << py(s.y[i] - s.yerr[i]) << "\" x2=\"" << px(s.x[i])
                << "\" y2=\"" << py(s.y[i] + s.yerr[i]) << "\" stroke=\""
                << s.color << "\"/>\n";
    }
    out << "</svg>\n";

    std::ofstream f(path);
    if (!f) throw IoError("cannot write plot " + path);
    f << out.str();
}

}  // namespace glint::eval
