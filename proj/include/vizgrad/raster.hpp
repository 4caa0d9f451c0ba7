#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vizgrad/data.hpp"
#include "vizgrad/image.hpp"
#include "vizgrad/params.hpp"
#include "vizgrad/visualizer.hpp"

namespace vizgrad::raster {

// Numeric input of a chart: literal values, or the realized values of a
// named parameter.
struct Operand {
    std::string param;
    std::vector<double> literal;

    static Operand fixed(std::vector<double> values) { return {{}, std::move(values)}; }
    static Operand of(std::string name) { return {std::move(name), {}}; }
    [[nodiscard]] bool is_param() const noexcept { return !param.empty(); }
};

// value -> range through a polynomial of the normalized value:
//   t   = smooth clamp of (value - d_lo) / (d_hi - d_lo) into [0,1]
//   out = r_lo + (r_hi - r_lo) * sigmoid(sum_k coeffs[k] * t^k)
// With several candidate attributes, `choice` names a categorical parameter
// and the output is the weight-blended output over candidates.
struct EncodingMap {
    std::vector<std::string> attributes;
    std::string choice;
    std::optional<Operand> domain;                    // ordered pair; default: attribute extent
    Operand coeffs = Operand::fixed({-4.0, 8.0});     // 1..6 coefficients
    Operand range = Operand::fixed({0.0, 1.0});       // (r_lo, r_hi)
};

// Two endpoint colors in a luminance/chroma space (L, u, v), YUV-like.
// The end luminance is start.L + softplus(delta), so L increases along the
// map for every parameter value. Output RGB passes a smooth gamut squash.
struct Colormap {
    Operand start = Operand::fixed({0.2, 0.15, -0.1});
    Operand delta_luminance = Operand::fixed({0.5});
    Operand end_chroma = Operand::fixed({-0.15, 0.1});
};

struct MappedColor {
    EncodingMap map;  // range should stay within [0,1]
    Colormap colormap;
};

using SizeChannel = std::variant<Operand, EncodingMap>;   // radius px, or map into px
using ColorChannel = std::variant<Operand, MappedColor>;  // fixed RGB, or colormap

inline constexpr double min_opacity = 0.02;

struct ChartSpec {
    std::size_t width = 256;
    std::size_t height = 256;
    std::array<double, 3> background = {1.0, 1.0, 1.0};
    double smoothing = 0.7;  // px
    double margin = 0.08;    // plot inset, fraction of the view
    bool axes = true;
    EncodingMap x;
    EncodingMap y;
    SizeChannel size = Operand::fixed({3.0});
    ColorChannel color = Operand::fixed({0.12, 0.35, 0.7});
    Operand opacity = Operand::fixed({0.8});  // within [0.02, 1]
};

// A view occupies rect (cx, cy, w, h) in unit canvas coordinates. The
// realized rectangle has extent W = min_extent + (1 - min_extent) * w and
// left edge cx * (1 - W), so it always lies inside the canvas.
struct View {
    std::optional<Operand> rect;  // 4 values in [0,1]; default: full canvas
    ChartSpec chart;              // width/height/background/smoothing ignored
};

struct Layout {
    std::size_t width = 256;
    std::size_t height = 256;
    std::array<double, 3> background = {1.0, 1.0, 1.0};
    double smoothing = 0.7;
    double min_extent = 0.2;
    double overlap_weight = 0.0;      // lambda
    double overlap_smoothing = 0.01;  // canvas units
    std::vector<View> views;

    // Single full-canvas view.
    static Layout single(const ChartSpec& chart);
};

struct RenderOptions {
    unsigned threads = 1;
};

// Rectangle of a view in canvas pixels.
struct Rect {
    double x0, y0, width, height;
};

// Checks attributes, parameter kinds and lengths, and bounds against the
// dataset and schema. Throws ValidationError.
void validate(const Layout& layout, const data::Dataset& d, const params::ParamSchema& schema);

class ChartRenderer final : public Visualizer {
public:
    ChartRenderer(data::Dataset d, Layout layout, params::SchemaPtr schema, RenderOptions options = {});
    ChartRenderer(data::Dataset d, const ChartSpec& chart, params::SchemaPtr schema, RenderOptions options = {})
        : ChartRenderer(std::move(d), Layout::single(chart), std::move(schema), options) {}

    [[nodiscard]] const params::SchemaPtr& schema() const override { return schema_; }
    [[nodiscard]] const Layout& layout() const noexcept { return layout_; }
    [[nodiscard]] const data::Dataset& dataset() const noexcept { return data_; }

    [[nodiscard]] Image render(const params::RealizedParams& r) const override;

    // Gradient wrt realized values of sum(cotangent * render(r)).
    [[nodiscard]] std::vector<double> realized_vjp(const params::RealizedParams& r,
                                                   const ImageGradient& cotangent) const;

    [[nodiscard]] std::vector<double> render_vjp(const params::ParamVector& p, const ImageGradient& cotangent,
                                                 const params::ConstrainOptions& options) const override;

    [[nodiscard]] double penalty(const params::RealizedParams& r) const override;
    [[nodiscard]] std::vector<double> penalty_vjp(const params::ParamVector& p,
                                                  const params::ConstrainOptions& options) const override;

    [[nodiscard]] std::unique_ptr<Visualizer> with_dataset(const data::Dataset& d) const override;

    // Realized view rectangles in pixels.
    [[nodiscard]] std::vector<Rect> view_rects(const params::RealizedParams& r) const;

    void set_threads(unsigned threads) noexcept { options_.threads = threads; }

private:
    data::Dataset data_;
    Layout layout_;
    params::SchemaPtr schema_;
    RenderOptions options_;
};

Image render(const data::Dataset& d, const Layout& layout, const params::RealizedParams& r,
             const RenderOptions& options = {});
Image render(const data::Dataset& d, const ChartSpec& chart, const params::RealizedParams& r,
             const RenderOptions& options = {});

std::vector<double> render_vjp(const data::Dataset& d, const Layout& layout, const params::ParamVector& p,
                               const ImageGradient& cotangent, const params::ConstrainOptions& options,
                               const RenderOptions& render_options = {});

// Explicit domain for eval_encoding when the map has no domain operand.
struct Domain {
    double lo = 0.0;
    double hi = 1.0;
};

// Single-value evaluation of a map over one attribute value (first candidate
// attribute semantics). Throws ValidationError on a degenerate domain.
double eval_encoding(const EncodingMap& map, double value, const params::RealizedParams& r,
                     Domain fallback = {});

double layout_penalty(const Layout& layout, const params::RealizedParams& r);

// Mark and stroke coverage profile: sigmoid(t / s) with a smooth taper to
// exactly zero over t/s in [-6, -4]. `t` is the signed distance inside.
double coverage(double t, double s) noexcept;
double coverage_derivative(double t, double s) noexcept;

// (L, u, v) -> RGB before squashing.
std::array<double, 3> luv_to_rgb(double l, double u, double v) noexcept;

}  // namespace vizgrad::raster
