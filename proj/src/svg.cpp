#include "hesm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hesm::cli {

namespace {

std::string escape(const std::string& s) {
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

std::string fmt(double x, const char* spec = "%.6g") {
    char buf[32];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    double n = 10.0;
    if (f <= 1.0) n = 1.0;
    else if (f <= 2.0) n = 2.0;
    else if (f <= 5.0) n = 5.0;
    return n * mag;
}

const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

} // namespace

std::string render_svg(const Chart& chart) {
    const double W = chart.width, H = chart.height;
    const double ml = 70, mr = 20, mt = 40, mb = 55;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 <= 0) x1 = x0 + 1;
    if (y1 - y0 <= 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (y1 - y) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
      << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title)
      << "</text>\n";

    // grid and ticks
    o << "<g stroke=\"#e0e0e0\" stroke-width=\"1\">\n";
    const double xs = nice_step(x1 - x0, 8), ys = nice_step(y1 - y0, 6);
    std::ostringstream labels;
    for (double x = std::ceil(x0 / xs) * xs; x <= x1 + 1e-9 * xs; x += xs) {
        o << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << mt << "\" x2=\"" << fmt(px(x)) << "\" y2=\"" << mt + ph
          << "\"/>\n";
        labels << "<text x=\"" << fmt(px(x)) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">"
               << fmt(std::abs(x) < 1e-12 * xs ? 0.0 : x) << "</text>\n";
    }
    for (double y = std::ceil(y0 / ys) * ys; y <= y1 + 1e-9 * ys; y += ys) {
        o << "<line x1=\"" << ml << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << ml + pw << "\" y2=\"" << fmt(py(y))
          << "\"/>\n";
        labels << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(py(y) + 4) << "\" text-anchor=\"end\">"
               << fmt(std::abs(y) < 1e-12 * ys ? 0.0 : y) << "</text>\n";
    }
    o << "</g>\n" << labels.str();
    o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(chart.x_label)
      << "</text>\n";
    o << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\">" << escape(chart.y_label) << "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const std::string color = s.color.empty() ? palette[k % std::size(palette)] : s.color;
        const std::size_t n = std::min(s.x.size(), s.y.size());
        // one min/max pair per horizontal pixel
        const std::size_t buckets = static_cast<std::size_t>(pw);
        std::vector<std::pair<double, double>> pts;
        if (n <= 2 * buckets) {
            for (std::size_t i = 0; i < n; ++i) pts.emplace_back(s.x[i], s.y[i]);
        } else {
            std::size_t i = 0;
            for (std::size_t b = 0; b < buckets && i < n; ++b) {
                const std::size_t end = std::min(n, (b + 1) * n / buckets);
                std::size_t lo = i, hi = i;
                for (std::size_t j = i; j < end; ++j) {
                    if (s.y[j] < s.y[lo]) lo = j;
                    if (s.y[j] > s.y[hi]) hi = j;
                }
                const auto a = std::min(lo, hi), c = std::max(lo, hi);
                pts.emplace_back(s.x[a], s.y[a]);
                if (c != a) pts.emplace_back(s.x[c], s.y[c]);
                i = end;
            }
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!std::isfinite(pts[i].first) || !std::isfinite(pts[i].second)) continue;
            o << (i ? " " : "") << fmt(px(pts[i].first), "%.2f") << ',' << fmt(py(pts[i].second), "%.2f");
        }
        o << "\"/>\n";
        const double ly = mt + 14 + 16 * static_cast<double>(k);
        o << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw - 130 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << ml + pw - 124 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

} // namespace hesm::cli
