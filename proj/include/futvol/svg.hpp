#pragma once

// Minimal static SVG charts: line and marker series on linear or log axes.
// Output depends only on the data, so reruns are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "futvol/errors.hpp"

namespace futvol::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool line = true;  ///< false draws markers only
    std::string color = "#1f4e9c";
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 640;
    int height = 420;
    std::vector<Series> series;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

// Roughly five round ticks spanning [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return out;
}

}  // namespace detail

inline std::string render(const Chart& c) {
    using detail::px;
    const double left = 70, right = 20, top = 36, bottom = 52;
    const double pw = c.width - left - right, ph = c.height - top - bottom;
    auto tx = [&](double v) { return c.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return c.log_y ? std::log10(v) : v; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : c.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if ((c.log_x && s.x[i] <= 0) || (c.log_y && s.y[i] <= 0)) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 <= 0) {
        const double pad = std::max(std::abs(y0) * 0.05, 1e-6);
        y0 -= pad, y1 += pad;
    }
    const double ypad = 0.05 * (y1 - y0);
    y0 -= ypad;
    y1 += ypad;
    auto sx = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
    auto sy = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * ph; };
    auto gx = [&](double t) { return left + (t - x0) / (x1 - x0) * pw; };
    auto gy = [&](double t) { return top + (1.0 - (t - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\""
      << c.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << px(c.width / 2.0) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
      << detail::escape(c.title) << "</text>\n";
    o << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(pw)
      << "\" height=\"" << px(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (double t : detail::ticks(x0, x1)) {
        const double X = gx(t);
        o << "<line x1=\"" << px(X) << "\" y1=\"" << px(top) << "\" x2=\"" << px(X) << "\" y2=\""
          << px(top + ph) << "\" stroke=\"#e4e4e4\"/>\n";
        o << "<text x=\"" << px(X) << "\" y=\"" << px(top + ph + 15)
          << "\" text-anchor=\"middle\">" << detail::num(c.log_x ? std::pow(10.0, t) : t)
          << "</text>\n";
    }
    for (double t : detail::ticks(y0, y1)) {
        const double Y = gy(t);
        o << "<line x1=\"" << px(left) << "\" y1=\"" << px(Y) << "\" x2=\"" << px(left + pw)
          << "\" y2=\"" << px(Y) << "\" stroke=\"#e4e4e4\"/>\n";
        o << "<text x=\"" << px(left - 6) << "\" y=\"" << px(Y + 4) << "\" text-anchor=\"end\">"
          << detail::num(c.log_y ? std::pow(10.0, t) : t) << "</text>\n";
    }
    o << "<text x=\"" << px(left + pw / 2) << "\" y=\"" << px(c.height - 12.0)
      << "\" text-anchor=\"middle\">" << detail::escape(c.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << px(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(c.y_label) << "</text>\n";

    double ly = top + 14;
    for (const auto& s : c.series) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if ((c.log_x && s.x[i] <= 0) || (c.log_y && s.y[i] <= 0)) continue;
            if (s.line) {
                pts += px(sx(s.x[i])) + "," + px(sy(s.y[i])) + " ";
            } else {
                o << "<circle cx=\"" << px(sx(s.x[i])) << "\" cy=\"" << px(sy(s.y[i]))
                  << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
            }
        }
        if (s.line && !pts.empty()) {
            pts.pop_back();
            o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\""
              << pts << "\"/>\n";
        }
        if (!s.label.empty()) {
            o << "<text x=\"" << px(left + pw - 8) << "\" y=\"" << px(ly)
              << "\" text-anchor=\"end\" fill=\"" << s.color << "\">" << detail::escape(s.label)
              << "</text>\n";
            ly += 14;
        }
    }
    o << "</svg>\n";
    return o.str();
}

inline void write(const Chart& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("svg: cannot open " + path.string());
    out << render(c);
}

/// A fixed cycle of distinguishable colours.
inline std::string palette(std::size_t i) {
    static const char* colors[] = {"#1f4e9c", "#c2410c", "#15803d", "#7e22ce", "#b91c1c", "#0e7490",
                                   "#a16207", "#4b5563"};
    return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

}  // namespace futvol::svg
