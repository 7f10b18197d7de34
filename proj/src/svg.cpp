#include "hoekf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace hoekf {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// tick step from the 1-2-5 ladder
double nice_step(double span, int target) {
    const double raw = span / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag * (1.0 + 1e-12)) return m * mag;
    }
    return 10.0 * mag;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_line_plot(const std::string& path, std::span<const PlotSeries> series,
                     const PlotSpec& spec) {
    if (series.empty()) throw std::invalid_argument("write_line_plot: no series");

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    bool any = false;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            const double y = s.y[i];
            if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
            if (spec.log_y && !(y > 0.0)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            const double yv = spec.log_y ? std::log10(y) : y;
            ymin = std::min(ymin, yv);
            ymax = std::max(ymax, yv);
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("write_line_plot: series carry no drawable point");
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const int W = spec.width, H = spec.height;
    const int ml = 70, mr = 20, mt = spec.title.empty() ? 20 : 44, mb = 52;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double yv) { return mt + (ymax - yv) / (ymax - ymin) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_line_plot: cannot open " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (!spec.title.empty()) {
        out << "<text x=\"" << W / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
               "text-anchor=\"middle\">"
            << escape(spec.title) << "</text>\n";
    }

    // axes frame
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw) << "\" height=\""
        << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

    // x ticks
    const double xstep = nice_step(xmax - xmin, 8);
    for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-12 * xstep; x += xstep) {
        out << "<line x1=\"" << num(px(x)) << "\" y1=\"" << mt + ph << "\" x2=\"" << num(px(x))
            << "\" y2=\"" << num(mt + ph + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(px(x)) << "\" y=\"" << num(mt + ph + 20)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << num(x)
            << "</text>\n";
    }
    // y ticks
    if (spec.log_y) {
        const int lo = static_cast<int>(std::floor(ymin));
        const int hi = static_cast<int>(std::ceil(ymax));
        for (int e = lo; e <= hi; ++e) {
            if (e < ymin - 1e-9 || e > ymax + 1e-9) continue;
            out << "<line x1=\"" << ml - 5 << "\" y1=\"" << num(py(e)) << "\" x2=\"" << ml
                << "\" y2=\"" << num(py(e)) << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << ml - 8 << "\" y=\"" << num(py(e) + 4)
                << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e" << e
                << "</text>\n";
        }
    } else {
        const double ystep = nice_step(ymax - ymin, 6);
        for (double y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-12 * ystep; y += ystep) {
            out << "<line x1=\"" << ml - 5 << "\" y1=\"" << num(py(y)) << "\" x2=\"" << ml
                << "\" y2=\"" << num(py(y)) << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << ml - 8 << "\" y=\"" << num(py(y) + 4)
                << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" << num(y)
                << "</text>\n";
        }
    }
    if (!spec.xlabel.empty()) {
        out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
            << escape(spec.xlabel) << "</text>\n";
    }
    if (!spec.ylabel.empty()) {
        out << "<text x=\"16\" y=\"" << mt + ph / 2
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
               "transform=\"rotate(-90 16 "
            << mt + ph / 2 << ")\">" << escape(spec.ylabel) << "</text>\n";
    }

    // polylines
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        std::string points;
        bool open = false;
        auto flush = [&]() {
            if (open && !points.empty()) {
                out << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
            }
            points.clear();
            open = false;
        };
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            const double y = s.y[i];
            if (!std::isfinite(s.x[i]) || !std::isfinite(y) || (spec.log_y && !(y > 0.0))) {
                flush();
                continue;
            }
            const double yv = spec.log_y ? std::log10(y) : y;
            points += num(px(s.x[i])) + "," + num(py(yv)) + " ";
            open = true;
        }
        flush();
    }

    // legend
    const int lx = ml + 12;
    int ly = mt + 14;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 26 << "\" y2=\""
            << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << lx + 32 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[si].label)
            << "</text>\n";
        ly += 16;
    }
    out << "</svg>\n";
}

}  // namespace hoekf
