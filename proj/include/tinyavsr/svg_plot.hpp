#pragma once

// Minimal self-contained SVG line plots for the sweep reports: labeled axes,
// tick marks, markers and a legend, no external assets.

#include <string>
#include <utility>
#include <vector>

namespace avsr {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotConfig {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 440;
    // explicit x tick positions + labels (lets callers place an "inf" slot)
    std::vector<std::pair<double, std::string>> x_ticks;
};

std::string render_line_plot_svg(const std::vector<PlotSeries>& series, const PlotConfig& cfg);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace avsr
