#include "icl/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace icl {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void check_nonempty(const std::vector<Curve>& curves) {
    if (curves.empty()) throw std::invalid_argument("curve set must be nonempty");
    for (const auto& c : curves)
        if (c.points.empty())
            throw std::invalid_argument("curve '" + c.name + "' has no points");
}

} // namespace

void emit_csv(const std::vector<Curve>& curves, const std::string& path) {
    check_nonempty(curves);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "x,series,value,stderr\n";
    for (const auto& c : curves)
        for (const auto& p : c.points)
            out << fmt(p.x) << "," << c.name << "," << fmt(p.value) << "," << fmt(p.stderr_)
                << "\n";
    if (!out.flush()) throw std::runtime_error("write failed for " + path);
}

std::vector<Curve> parse_curves_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "x,series,value,stderr")
        throw std::runtime_error("unexpected CSV header in " + path);

    std::vector<Curve> curves;
    std::map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string xs, series, vs, es;
        if (!std::getline(ss, xs, ',') || !std::getline(ss, series, ',') ||
            !std::getline(ss, vs, ',') || !std::getline(ss, es))
            throw std::runtime_error("malformed CSV row in " + path);
        auto [it, inserted] = index.try_emplace(series, curves.size());
        if (inserted) curves.push_back(Curve{series, {}});
        curves[it->second].points.push_back(
            CurvePoint{std::stod(xs), std::stod(vs), std::stod(es)});
    }
    return curves;
}

void emit_svg(const std::vector<Curve>& curves, const std::string& path,
              const SvgOptions& options) {
    check_nonempty(curves);
    constexpr double width = 860, height = 560;
    constexpr double ml = 80, mr = 210, mt = 50, mb = 60;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    // In log mode nonpositive values are clamped to half the smallest positive one.
    double min_pos_x = std::numeric_limits<double>::infinity();
    double min_pos_y = std::numeric_limits<double>::infinity();
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            if (p.x > 0) min_pos_x = std::min(min_pos_x, p.x);
            if (p.value > 0) min_pos_y = std::min(min_pos_y, p.value);
        }
    if (!std::isfinite(min_pos_x)) min_pos_x = 1.0;
    if (!std::isfinite(min_pos_y)) min_pos_y = 1.0;

    auto tx = [&](double x) { return options.log_x ? std::log10(std::max(x, 0.5 * min_pos_x)) : x; };
    auto ty = [&](double y) {
        return options.log_y ? std::log10(std::max(y, 0.5 * min_pos_y)) : y;
    };

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            x_lo = std::min(x_lo, tx(p.x));
            x_hi = std::max(x_hi, tx(p.x));
            y_lo = std::min(y_lo, ty(p.value));
            y_hi = std::max(y_hi, ty(p.value));
        }
    if (x_hi - x_lo < 1e-12) { x_lo -= 0.5; x_hi += 0.5; }
    if (y_hi - y_lo < 1e-12) { y_lo -= 0.5; y_hi += 0.5; }
    const double y_pad = 0.05 * (y_hi - y_lo);
    y_lo -= y_pad;
    y_hi += y_pad;

    auto px = [&](double x) { return ml + (tx(x) - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return mt + plot_h - (ty(y) - y_lo) / (y_hi - y_lo) * plot_h; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << ml << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\">"
        << options.title << "</text>\n";

    // Frame.
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";

    // Ticks: decades in log mode, five even steps otherwise.
    auto emit_y_tick = [&](double v, const std::string& label) {
        const double y = py(v);
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << fmt2(y) << "\" x2=\"" << ml << "\" y2=\""
            << fmt2(y) << "\" stroke=\"#333\"/>\n";
        out << "<line x1=\"" << ml << "\" y1=\"" << fmt2(y) << "\" x2=\"" << ml + plot_w
            << "\" y2=\"" << fmt2(y) << "\" stroke=\"#eee\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << fmt2(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << label
            << "</text>\n";
    };
    auto emit_x_tick = [&](double v, const std::string& label) {
        const double x = px(v);
        out << "<line x1=\"" << fmt2(x) << "\" y1=\"" << mt + plot_h << "\" x2=\"" << fmt2(x)
            << "\" y2=\"" << mt + plot_h + 4 << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << fmt2(x) << "\" y=\"" << mt + plot_h + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << label
            << "</text>\n";
    };
    char lbl[40];
    if (options.log_y) {
        for (int e = static_cast<int>(std::floor(y_lo)); e <= static_cast<int>(std::ceil(y_hi));
             ++e) {
            if (e < y_lo || e > y_hi) continue;
            std::snprintf(lbl, sizeof(lbl), "1e%d", e);
            emit_y_tick(std::pow(10.0, e), lbl);
        }
    } else {
        for (int i = 0; i <= 5; ++i) {
            const double v = y_lo + (y_hi - y_lo) * i / 5;
            std::snprintf(lbl, sizeof(lbl), "%.3g", v);
            emit_y_tick(v, lbl);
        }
    }
    if (options.log_x) {
        for (int e = static_cast<int>(std::floor(x_lo)); e <= static_cast<int>(std::ceil(x_hi));
             ++e) {
            if (e < x_lo || e > x_hi) continue;
            std::snprintf(lbl, sizeof(lbl), "1e%d", e);
            emit_x_tick(std::pow(10.0, e), lbl);
        }
    } else {
        for (int i = 0; i <= 5; ++i) {
            const double v = x_lo + (x_hi - x_lo) * i / 5;
            std::snprintf(lbl, sizeof(lbl), "%.3g", v);
            emit_x_tick(v, lbl);
        }
    }

    out << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << options.x_label << "</text>\n";
    out << "<text x=\"20\" y=\"" << mt + plot_h / 2
        << "\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 "
        << mt + plot_h / 2 << ")\" text-anchor=\"middle\">" << options.y_label << "</text>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = palette[i % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& p : curves[i].points) out << fmt2(px(p.x)) << "," << fmt2(py(p.value)) << " ";
        out << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(i);
        out << "<line x1=\"" << ml + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\""
            << ml + plot_w + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + plot_w + 40 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << curves[i].name << "</text>\n";
    }
    out << "</svg>\n";
    if (!out.flush()) throw std::runtime_error("write failed for " + path);
}

} // namespace icl
