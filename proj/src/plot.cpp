#include "streamnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "streamnet/tensor.hpp"

namespace streamnet {

namespace {

// Colorblind-friendly cycle.
constexpr const char* kColors[] = {"#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00",
                                   "#56B4E9", "#F0E442", "#000000", "#999999", "#882255"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

struct Range {
    double lo, hi;
};

Range padded(double lo, double hi) {
    if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
    return {lo, hi};
}

} // namespace

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string tag_from_stem(const std::string& stem) {
    const auto start = stem.find("noise_");
    const auto last = stem.rfind('_');
    if (start == std::string::npos || last == std::string::npos || last <= start) return stem;
    const std::string seed = stem.substr(last + 1);
    if (seed.empty() || !std::all_of(seed.begin(), seed.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return stem;
    }
    return stem.substr(start, last - start);
}

std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& o) {
    if (series.empty()) throw Error("line chart: no series to plot");
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const Series& s : series) {
        if (s.points.empty()) throw Error("line chart: series '" + s.label + "' has no points");
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) throw Error("line chart: non-finite point in '" + s.label + "'");
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    const Range xr = padded(x0, x1);
    Range yr = padded(std::min(0.0, y0), y1);
    if (y1 <= 1.0 && y0 >= 0.0) yr = {0.0, 1.0};

    const double left = 70, right = 220, top = 40, bottom = 50;
    const double pw = o.width - left - right;
    const double ph = o.height - top - bottom;
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
       << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!o.title.empty()) {
        os << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
           << xml_escape(o.title) << "</text>\n";
    }
    os << "<g stroke=\"#ddd\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double y = yr.lo + (yr.hi - yr.lo) * i / 5.0;
        os << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(left + pw) << "\" y2=\""
           << num(py(y)) << "\"/>\n";
    }
    os << "</g>\n<g>\n";
    for (int i = 0; i <= 5; ++i) {
        const double y = yr.lo + (yr.hi - yr.lo) * i / 5.0;
        const double x = xr.lo + (xr.hi - xr.lo) * i / 5.0;
        os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << tick(y)
           << "</text>\n";
        os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << tick(x)
           << "</text>\n";
    }
    os << "</g>\n"
       << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n"
       << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(o.height - 12.0) << "\" text-anchor=\"middle\">"
       << xml_escape(o.x_label) << "</text>\n"
       << "<text transform=\"translate(18," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << xml_escape(o.y_label) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kColors[i % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < series[i].points.size(); ++k) {
            os << (k ? " " : "") << num(px(series[i].points[k].first)) << ',' << num(py(series[i].points[k].second));
        }
        os << "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(i);
        os << "<line x1=\"" << num(left + pw + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 40)
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
           << "<text x=\"" << num(left + pw + 46) << "\" y=\"" << num(ly + 4) << "\">" << xml_escape(series[i].label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string histogram_svg(const std::vector<BarSeries>& panels, const ChartOptions& o) {
    if (panels.empty()) throw Error("histogram chart: no histograms to plot");
    const double left = 70, right = 20, top = 40, gap = 40, panel_h = 160;
    const double pw = o.width - left - right;
    const double height = top + static_cast<double>(panels.size()) * (panel_h + gap) + 10;
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << num(height)
       << "\" viewBox=\"0 0 " << o.width << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!o.title.empty()) {
        os << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
           << xml_escape(o.title) << "</text>\n";
    }
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const BarSeries& b = panels[p];
        if (b.counts.empty() || b.edges.size() != b.counts.size() + 1) {
            throw Error("histogram chart: '" + b.label + "' needs bins + 1 edges");
        }
        const double y_top = top + static_cast<double>(p) * (panel_h + gap) + 16;
        const double cmax = std::max(1.0, *std::max_element(b.counts.begin(), b.counts.end()));
        const double lo = b.edges.front();
        const double hi = b.edges.back();
        auto px = [&](double x) { return left + (x - lo) / (hi > lo ? hi - lo : 1.0) * pw; };
        const char* color = kColors[p % std::size(kColors)];
        os << "<text x=\"" << num(left) << "\" y=\"" << num(y_top - 4) << "\">" << xml_escape(b.label) << "</text>\n"
           << "<g fill=\"" << color << "\">\n";
        for (std::size_t i = 0; i < b.counts.size(); ++i) {
            const double h = b.counts[i] / cmax * panel_h;
            os << "<rect x=\"" << num(px(b.edges[i])) << "\" y=\"" << num(y_top + panel_h - h) << "\" width=\""
               << num(std::max(0.5, px(b.edges[i + 1]) - px(b.edges[i]) - 0.5)) << "\" height=\"" << num(h)
               << "\"/>\n";
        }
        os << "</g>\n"
           << "<rect x=\"" << num(left) << "\" y=\"" << num(y_top) << "\" width=\"" << num(pw) << "\" height=\""
           << num(panel_h) << "\" fill=\"none\" stroke=\"black\"/>\n"
           << "<text x=\"" << num(left) << "\" y=\"" << num(y_top + panel_h + 14) << "\" text-anchor=\"middle\">"
           << tick(lo) << "</text>\n"
           << "<text x=\"" << num(left + pw) << "\" y=\"" << num(y_top + panel_h + 14) << "\" text-anchor=\"middle\">"
           << tick(hi) << "</text>\n"
           << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y_top + 10) << "\" text-anchor=\"end\">" << tick(cmax)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace streamnet
