#pragma once

#include <string>
#include <vector>

namespace kinlim {

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool points = false;  // markers instead of a polyline
};

struct Figure {
    std::string name;  // file stem
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<Series> series;
};

// Standalone SVG; nonpositive values are dropped on log axes.
std::string render_svg(const Figure& fig);
// gnuplot script with the data inline.
std::string render_gnuplot(const Figure& fig);

}  // namespace kinlim
