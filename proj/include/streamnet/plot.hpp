#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace streamnet {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct ChartOptions {
    std::string title;
    std::string x_label = "epoch";
    std::string y_label = "accuracy";
    int width = 800;
    int height = 500;
};

/// Standalone SVG with one polyline per series and a legend. Throws Error on an empty series list.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options = {});

struct BarSeries {
    std::string label;
    std::vector<double> edges;  // bins + 1
    std::vector<double> counts;
};

/// Histograms as bar charts stacked vertically, one panel each.
std::string histogram_svg(const std::vector<BarSeries>& panels, const ChartOptions& options = {});

/// Escapes &, <, >, " and ' for XML text and attributes.
std::string xml_escape(const std::string& text);

/// Legend tag recovered from a log file stem {dataset}_{tag}_{seed}; the stem itself otherwise.
std::string tag_from_stem(const std::string& stem);

} // namespace streamnet
