#pragma once

#include <string>
#include <vector>

#include "chatty/matrix.hpp"

namespace chatty {

// One named curve for line plots.
struct Series {
    std::string name;
    std::vector<std::pair<Real, Real>> points;
};

// Color-per-class scatter of 2-D points (points is N x 2, labels size N).
// Returns a complete standalone SVG document; an empty input yields a valid
// axes-only plot. Output is deterministic in its inputs.
std::string scatter_svg(const Mat& points, const std::vector<int>& labels,
                        const std::string& title);

// Overlaid line plot with a legend, one polyline per series.
std::string curves_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

}  // namespace chatty
