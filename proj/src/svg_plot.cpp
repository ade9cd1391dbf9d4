#include "tinyavsr/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tinyavsr/common.hpp"

namespace avsr {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    std::ostringstream os;
    if (std::fabs(v - std::round(v)) < 1e-9) {
        os << static_cast<long long>(std::llround(v));
    } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        os << buf;
    }
    return os.str();
}

}  // namespace

std::string render_line_plot_svg(const std::vector<PlotSeries>& series, const PlotConfig& cfg) {
    if (series.empty()) throw ParamError("svg plot: no series");
    const int ml = 64, mr = 150, mt = 48, mb = 56;  // margins, legend on the right
    const double pw = cfg.width - ml - mr, ph = cfg.height - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ParamError("svg plot: x/y size mismatch");
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) ymax = std::max(ymax, v);
    }
    for (const auto& [pos, label] : cfg.x_ticks) {
        xmin = std::min(xmin, pos);
        xmax = std::max(xmax, pos);
    }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    ymax *= 1.08;  // headroom

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cfg.width << "\" height=\""
       << cfg.height << "\" viewBox=\"0 0 " << cfg.width << " " << cfg.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << cfg.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"16\">" << cfg.title << "</text>\n";

    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"black\"/>\n";

    // x ticks: explicit when provided, otherwise linear
    std::vector<std::pair<double, std::string>> xticks = cfg.x_ticks;
    if (xticks.empty()) {
        for (int i = 0; i <= 5; ++i) {
            const double v = xmin + (xmax - xmin) * i / 5.0;
            xticks.emplace_back(v, fmt(v));
        }
    }
    for (const auto& [pos, label] : xticks) {
        const double x = px(pos);
        os << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\""
           << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << mt + ph + 20
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << label
           << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double v = ymin + (ymax - ymin) * i / 5.0;
        const double y = py(v);
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
           << "\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw << "\" y2=\"" << y
           << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << ml - 9 << "\" y=\"" << y + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << fmt(v)
           << "</text>\n";
    }

    // axis labels
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << cfg.height - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
       << cfg.x_label << "</text>\n";
    os << "<text x=\"16\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       << "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">" << cfg.y_label << "</text>\n";

    // series
    for (size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % 8];
        std::ostringstream pts;
        for (size_t i = 0; i < series[s].x.size(); ++i) {
            if (i) pts << " ";
            pts << px(series[s].x[i]) << "," << py(series[s].y[i]);
        }
        os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n";
        for (size_t i = 0; i < series[s].x.size(); ++i) {
            os << "<circle cx=\"" << px(series[s].x[i]) << "\" cy=\"" << py(series[s].y[i])
               << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
        }
        const double ly = mt + 16 + 20.0 * static_cast<double>(s);
        os << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].label
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw ConfigError("failed while writing '" + path + "'");
}

}  // namespace avsr
