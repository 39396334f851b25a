#pragma once

#include <string>
#include <vector>

namespace icl {

struct CurvePoint {
    double x = 0.0;
    double value = 0.0;
    double stderr_ = 0.0;
};

struct Curve {
    std::string name;
    std::vector<CurvePoint> points;
};

/// CSV with header x,series,value,stderr, full double precision.
void emit_csv(const std::vector<Curve>& curves, const std::string& path);
std::vector<Curve> parse_curves_csv(const std::string& path);

struct SvgOptions {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "value";
    bool log_x = false;
    bool log_y = true;
};

/// Self-contained log-scale line chart; no external assets.
void emit_svg(const std::vector<Curve>& curves, const std::string& path,
              const SvgOptions& options);

} // namespace icl
