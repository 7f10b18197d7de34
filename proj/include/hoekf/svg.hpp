#pragma once

#include <span>
#include <string>
#include <vector>

namespace hoekf {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_y = false;  // non-positive samples are skipped on a log axis
    int width = 760;
    int height = 500;
};

/// Static SVG 1.1 line plot with axes, tick labels, and a legend. Output is
/// deterministic for fixed inputs. NaN samples break the polyline. Throws
/// when no series carries a drawable point.
void write_line_plot(const std::string& path, std::span<const PlotSeries> series,
                     const PlotSpec& spec);

}  // namespace hoekf
