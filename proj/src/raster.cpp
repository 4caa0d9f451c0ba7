#include "vizgrad/raster.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "vizgrad/autodiff.hpp"
#include "vizgrad/error.hpp"

namespace vizgrad::raster {

using ad::Var;
using params::ParamKind;

namespace {

constexpr double clamp_sharpness = 20.0;
constexpr double squash_gain = 4.0;
constexpr double color_eps = 1e-12;
constexpr double distance_eps = 1e-12;
constexpr double taper_start = -4.0;  // in smoothing widths
constexpr double taper_end = -6.0;
constexpr double axis_half_width = 0.6;
constexpr double tick_length = 4.0;
constexpr int ticks_per_axis = 5;
constexpr double axis_alpha = 0.9;
constexpr std::array<double, 3> axis_color = {0.25, 0.25, 0.25};
constexpr double overlap_blend = 1e-3;
constexpr double min_domain_span = 1e-9;

// ---------------------------------------------------------------- tape helpers

struct Inputs {
    ad::Tape tape;
    std::vector<Var> realized;
    const params::ParamSchema* schema = nullptr;

    Inputs(const params::RealizedParams& r) : schema(&r.schema()) {
        const auto v = r.values();
        tape.reserve(v.size() + 1024);
        realized.reserve(v.size());
        for (double x : v) realized.push_back(tape.input(x));
    }

    Var constant(double v) { return tape.constant(v); }

    std::vector<Var> operand(const Operand& op) {
        if (!op.is_param()) {
            std::vector<Var> out;
            for (double v : op.literal) out.push_back(constant(v));
            return out;
        }
        const auto i = schema->index_of(op.param);
        const auto off = schema->offset(i);
        const auto n = schema->specs()[i].raw_size();
        return {realized.begin() + static_cast<std::ptrdiff_t>(off),
                realized.begin() + static_cast<std::ptrdiff_t>(off + n)};
    }
};

double sigmoid(double x) noexcept { return params::sigmoid(x); }

// (softplus(k z) - softplus(k (z - 1))) / k: ~z inside [0,1], smooth, in (0,1).
Var smooth_clamp01(Var z) {
    return (ad::softplus(z * clamp_sharpness) - ad::softplus(z * clamp_sharpness - clamp_sharpness)) /
           clamp_sharpness;
}

Var squash(Var x) { return ad::sigmoid((x - 0.5) * squash_gain); }

// Cubic polynomial smooth minimum (C2), blend width k.
Var smooth_min(Var a, Var b, double k) {
    const double av = a.value();
    const double bv = b.value();
    const double h = std::max(k - std::abs(av - bv), 0.0) / k;
    const double value = std::min(av, bv) - h * h * h * k / 6.0;
    const double to_other = h * h / 2.0;
    const double to_min = 1.0 - to_other;
    return av <= bv ? a.tape->binary(a, b, value, to_min, to_other) : a.tape->binary(a, b, value, to_other, to_min);
}

Var smooth_max(Var a, Var b, double k) { return -smooth_min(-a, -b, k); }

// C2 ramp: 0 below -s, x above s, integral of a smoothstep in between.
Var smooth_ramp(Var x, double s) {
    const double t = x.value() / s;
    if (t <= -1.0) return x.tape->unary(x, 0.0, 0.0);
    if (t >= 1.0) return x.tape->unary(x, x.value(), 1.0);
    const double t2 = t * t;
    const double g = 0.5 * t + 0.375 * t2 - 0.0625 * t2 * t2 + 0.1875;
    const double dg = 0.5 + 0.75 * t - 0.25 * t2 * t;
    return x.tape->unary(x, s * g, dg);
}

// ---------------------------------------------------------------- encoding plan

struct MapPlan {
    std::vector<std::size_t> attrs;
    std::vector<Var> weights;
    std::vector<Domain> extents;
    bool explicit_domain = false;
    Var domain_lo{}, inv_span{};
    std::vector<Var> coeffs;
    Var range_lo{}, range_span{};

    Var apply_value(Inputs& in, std::size_t candidate, double value) const {
        Var z{};
        if (explicit_domain) {
            z = (in.constant(value) - domain_lo) * inv_span;
        } else {
            const auto& e = extents[candidate];
            z = in.constant((value - e.lo) / (e.hi - e.lo));
        }
        const Var t = smooth_clamp01(z);
        Var poly = coeffs[0];
        Var power = t;
        for (std::size_t k = 1; k < coeffs.size(); ++k) {
            poly = poly + coeffs[k] * power;
            if (k + 1 < coeffs.size()) power = power * t;
        }
        return range_lo + range_span * ad::sigmoid(poly);
    }

    Var apply(Inputs& in, const data::Dataset& d, std::size_t row) const {
        if (attrs.size() == 1) return apply_value(in, 0, d.values(attrs[0])[row]);
        Var total = weights[0] * apply_value(in, 0, d.values(attrs[0])[row]);
        for (std::size_t k = 1; k < attrs.size(); ++k) {
            total = total + weights[k] * apply_value(in, k, d.values(attrs[k])[row]);
        }
        return total;
    }
};

Domain extent_of(const data::Attribute& a) {
    if (a.observed_max - a.observed_min < min_domain_span) {
        const double mid = 0.5 * (a.observed_min + a.observed_max);
        return {mid - 0.5, mid + 0.5};
    }
    return {a.observed_min, a.observed_max};
}

// A parameter domain can collapse when both ends saturate; rendering floors
// its span instead of failing unless `strict`.
void bind_common(MapPlan& plan, const EncodingMap& map, Inputs& in, bool strict) {
    if (map.domain) {
        const auto dom = in.operand(*map.domain);
        Var span = dom[1] - dom[0];
        if (span.value() < min_domain_span) {
            if (strict) throw ValidationError("encoding domain is degenerate (d_hi - d_lo < 1e-9)");
            span = in.constant(min_domain_span);
        }
        plan.explicit_domain = true;
        plan.domain_lo = dom[0];
        plan.inv_span = 1.0 / span;
    }
    plan.coeffs = in.operand(map.coeffs);
    const auto range = in.operand(map.range);
    plan.range_lo = range[0];
    plan.range_span = range[1] - range[0];
}

MapPlan plan_map(const EncodingMap& map, const data::Dataset& d, Inputs& in) {
    MapPlan plan;
    for (const auto& name : map.attributes) {
        const auto a = d.index_of(name);
        plan.attrs.push_back(a);
        plan.extents.push_back(extent_of(d.attribute(a)));
    }
    if (plan.attrs.size() > 1) plan.weights = in.operand(Operand::of(map.choice));
    bind_common(plan, map, in, false);
    return plan;
}

// ---------------------------------------------------------------- scene build

enum MarkField : std::size_t { f_cx, f_cy, f_r, f_red, f_green, f_blue, f_alpha, mark_fields };
enum RectField : std::size_t { f_x0, f_x1, f_y0, f_y1, rect_fields };

struct Mark {
    std::array<double, mark_fields> v;
    std::array<std::uint32_t, mark_fields> id;
};

struct SoftRect {
    std::array<double, rect_fields> v;
    std::array<std::uint32_t, rect_fields> id;
};

struct Scene {
    std::vector<Mark> marks;
    std::vector<SoftRect> strokes;
    std::vector<std::array<Var, 4>> views;  // x0, y0, w, h in px
};

std::array<Var, 4> view_rect(const View& view, const Layout& layout, Inputs& in) {
    std::vector<Var> u;
    if (view.rect) {
        u = in.operand(*view.rect);
    } else {
        u = {in.constant(0.5), in.constant(0.5), in.constant(1.0), in.constant(1.0)};
    }
    const double e = layout.min_extent;
    const Var w = e + (1.0 - e) * u[2];
    const Var h = e + (1.0 - e) * u[3];
    const Var left = u[0] * (1.0 - w);
    const Var top = u[1] * (1.0 - h);
    const auto cw = static_cast<double>(layout.width);
    const auto ch = static_cast<double>(layout.height);
    return {left * cw, top * ch, w * cw, h * ch};
}

Mark make_mark(std::array<Var, mark_fields> vars) {
    Mark m;
    for (std::size_t k = 0; k < mark_fields; ++k) {
        m.v[k] = vars[k].value();
        m.id[k] = vars[k].id;
    }
    return m;
}

SoftRect make_rect(Var x0, Var x1, Var y0, Var y1) {
    return SoftRect{{x0.value(), x1.value(), y0.value(), y1.value()}, {x0.id, x1.id, y0.id, y1.id}};
}

void add_axes(Scene& scene, const std::array<Var, 4>& rect, double margin) {
    const auto& [x0, y0, w, h] = rect;
    const Var left = x0 + w * margin;
    const Var right = x0 + w * (1.0 - margin);
    const Var top = y0 + h * margin;
    const Var bottom = y0 + h * (1.0 - margin);
    // x axis, y axis
    scene.strokes.push_back(make_rect(left, right, bottom - axis_half_width, bottom + axis_half_width));
    scene.strokes.push_back(make_rect(left - axis_half_width, left + axis_half_width, top, bottom));
    for (int i = 0; i < ticks_per_axis; ++i) {
        const double f = static_cast<double>(i) / (ticks_per_axis - 1);
        const Var xt = left + (right - left) * f;
        scene.strokes.push_back(make_rect(xt - axis_half_width, xt + axis_half_width, bottom, bottom + tick_length));
        const Var yt = bottom - (bottom - top) * f;
        scene.strokes.push_back(make_rect(left - tick_length, left, yt - axis_half_width, yt + axis_half_width));
    }
}

Scene build_scene(const Layout& layout, const data::Dataset& d, Inputs& in) {
    Scene scene;
    scene.marks.reserve(d.size() * layout.views.size());
    for (const auto& view : layout.views) {
        const auto rect = view_rect(view, layout, in);
        scene.views.push_back(rect);
        const auto& chart = view.chart;
        const auto& [x0, y0, vw, vh] = rect;
        const Var plot_left = x0 + vw * chart.margin;
        const Var plot_w = vw * (1.0 - 2.0 * chart.margin);
        const Var plot_bottom = y0 + vh * (1.0 - chart.margin);
        const Var plot_h = vh * (1.0 - 2.0 * chart.margin);

        const MapPlan xmap = plan_map(chart.x, d, in);
        const MapPlan ymap = plan_map(chart.y, d, in);

        std::optional<MapPlan> size_map;
        Var fixed_radius{};
        if (const auto* op = std::get_if<Operand>(&chart.size)) {
            fixed_radius = in.operand(*op)[0];
        } else {
            size_map = plan_map(std::get<EncodingMap>(chart.size), d, in);
        }

        std::optional<MapPlan> color_map;
        std::array<Var, 3> fixed_rgb{};
        Var l0{}, dl{}, u0{}, v0{}, du{}, dv{};
        if (const auto* op = std::get_if<Operand>(&chart.color)) {
            const auto rgb = in.operand(*op);
            fixed_rgb = {rgb[0], rgb[1], rgb[2]};
        } else {
            const auto& mc = std::get<MappedColor>(chart.color);
            color_map = plan_map(mc.map, d, in);
            const auto start = in.operand(mc.colormap.start);
            const auto end = in.operand(mc.colormap.end_chroma);
            l0 = start[0];
            u0 = start[1];
            v0 = start[2];
            dl = ad::softplus(in.operand(mc.colormap.delta_luminance)[0]);
            du = end[0] - u0;
            dv = end[1] - v0;
        }
        const Var alpha = in.operand(chart.opacity)[0];

        for (std::size_t row = 0; row < d.size(); ++row) {
            const Var cx = plot_left + plot_w * xmap.apply(in, d, row);
            const Var cy = plot_bottom - plot_h * ymap.apply(in, d, row);
            const Var radius = size_map ? size_map->apply(in, d, row) : fixed_radius;
            std::array<Var, 3> rgb = fixed_rgb;
            if (color_map) {
                const Var t = color_map->apply(in, d, row);
                const Var l = l0 + t * dl;
                const Var u = u0 + t * du;
                const Var v = v0 + t * dv;
                rgb = {squash(l + v * 1.13983), squash(l - u * 0.39465 - v * 0.58060), squash(l + u * 2.03211)};
            }
            scene.marks.push_back(make_mark({cx, cy, radius, rgb[0], rgb[1], rgb[2], alpha}));
        }
        if (chart.axes) add_axes(scene, rect, chart.margin);
    }
    return scene;
}

Var penalty_var(const Layout& layout, Inputs& in) {
    Var total = in.constant(0.0);
    if (layout.views.size() < 2 || layout.overlap_weight == 0.0) return total;
    std::vector<std::array<Var, 4>> unit;
    for (const auto& view : layout.views) {
        auto r = view_rect(view, layout, in);
        const auto cw = static_cast<double>(layout.width);
        const auto ch = static_cast<double>(layout.height);
        unit.push_back({r[0] / cw, r[1] / ch, r[2] / cw, r[3] / ch});
    }
    const double s = layout.overlap_smoothing;
    for (std::size_t i = 0; i < unit.size(); ++i) {
        for (std::size_t j = i + 1; j < unit.size(); ++j) {
            const auto& a = unit[i];
            const auto& b = unit[j];
            const Var ox = smooth_min(a[0] + a[2], b[0] + b[2], overlap_blend) - smooth_max(a[0], b[0], overlap_blend);
            const Var oy = smooth_min(a[1] + a[3], b[1] + b[3], overlap_blend) - smooth_max(a[1], b[1], overlap_blend);
            total = total + smooth_ramp(ox, s) * smooth_ramp(oy, s);
        }
    }
    return total * layout.overlap_weight;
}

// ---------------------------------------------------------------- raster core

template <class Fn>
void parallel_bands(unsigned threads, std::size_t rows, Fn&& fn) {
    const std::size_t n = std::max<std::size_t>(1, std::min<std::size_t>(threads, rows));
    if (n == 1) {
        fn(std::size_t{0}, rows, std::size_t{0});
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t lo = rows * t / n;
        const std::size_t hi = rows * (t + 1) / n;
        pool.emplace_back([&fn, lo, hi, t] { fn(lo, hi, t); });
    }
    for (auto& th : pool) th.join();
}

struct Bounds {
    std::size_t x0, x1, y0, y1;  // half-open
    bool empty() const { return x0 >= x1 || y0 >= y1; }
};

Bounds clip(double xmin, double xmax, double ymin, double ymax, std::size_t w, std::size_t h) {
    auto lo = [](double v, std::size_t n) {
        return static_cast<std::size_t>(std::clamp(std::floor(v), 0.0, static_cast<double>(n)));
    };
    auto hi = [](double v, std::size_t n) {
        return static_cast<std::size_t>(std::clamp(std::ceil(v) + 1.0, 0.0, static_cast<double>(n)));
    };
    return {lo(xmin, w), hi(xmax, w), lo(ymin, h), hi(ymax, h)};
}

Bounds mark_bounds(const Mark& m, double s, std::size_t w, std::size_t h) {
    const double reach = std::max(m.v[f_r], 0.0) - taper_end * s;
    return clip(m.v[f_cx] - reach, m.v[f_cx] + reach, m.v[f_cy] - reach, m.v[f_cy] + reach, w, h);
}

Bounds rect_bounds(const SoftRect& r, double s, std::size_t w, std::size_t h) {
    const double reach = -taper_end * s;
    return clip(r.v[f_x0] - reach, r.v[f_x1] + reach, r.v[f_y0] - reach, r.v[f_y1] + reach, w, h);
}

struct Accumulators {
    std::vector<double> product;       // product of nonzero (1 - w_i)
    std::vector<std::uint32_t> zeros;  // count of factors equal to zero
    std::vector<double> weight;        // sum of w_i
    std::vector<double> color;         // sum of w_i * rgb_i, 3 per pixel
    std::vector<double> stroke;        // product of (1 - axis_alpha * c_j)

    explicit Accumulators(std::size_t n) : product(n, 1.0), zeros(n, 0), weight(n, 0.0), color(3 * n, 0.0), stroke(n, 1.0) {}
};

struct RectCoverage {
    double value;
    std::array<double, rect_fields> partial;  // d coverage / d field
};

RectCoverage rect_coverage(const SoftRect& r, double px, double py, double s) {
    const double e0 = coverage(px - r.v[f_x0], s);
    const double e1 = coverage(r.v[f_x1] - px, s);
    const double e2 = coverage(py - r.v[f_y0], s);
    const double e3 = coverage(r.v[f_y1] - py, s);
    return {e0 * e1 * e2 * e3,
            {-coverage_derivative(px - r.v[f_x0], s) * e1 * e2 * e3,
             coverage_derivative(r.v[f_x1] - px, s) * e0 * e2 * e3,
             -coverage_derivative(py - r.v[f_y0], s) * e0 * e1 * e3,
             coverage_derivative(r.v[f_y1] - py, s) * e0 * e1 * e2}};
}

void accumulate(const Scene& scene, const Layout& layout, unsigned threads, Accumulators& acc) {
    const std::size_t W = layout.width;
    const std::size_t H = layout.height;
    const double s = layout.smoothing;
    parallel_bands(threads, H, [&](std::size_t band_lo, std::size_t band_hi, std::size_t) {
        for (const auto& m : scene.marks) {
            auto b = mark_bounds(m, s, W, H);
            b.y0 = std::max(b.y0, band_lo);
            b.y1 = std::min(b.y1, band_hi);
            if (b.empty()) continue;
            const double alpha = m.v[f_alpha];
            for (std::size_t y = b.y0; y < b.y1; ++y) {
                const double dy = static_cast<double>(y) + 0.5 - m.v[f_cy];
                for (std::size_t x = b.x0; x < b.x1; ++x) {
                    const double dx = static_cast<double>(x) + 0.5 - m.v[f_cx];
                    const double dist = std::sqrt(dx * dx + dy * dy + distance_eps);
                    const double c = coverage(m.v[f_r] - dist, s);
                    if (c == 0.0) continue;
                    const std::size_t i = y * W + x;
                    const double w = alpha * c;
                    const double f = 1.0 - w;
                    if (f == 0.0) {
                        ++acc.zeros[i];
                    } else {
                        acc.product[i] *= f;
                    }
                    acc.weight[i] += w;
                    acc.color[3 * i] += w * m.v[f_red];
                    acc.color[3 * i + 1] += w * m.v[f_green];
                    acc.color[3 * i + 2] += w * m.v[f_blue];
                }
            }
        }
        for (const auto& r : scene.strokes) {
            auto b = rect_bounds(r, s, W, H);
            b.y0 = std::max(b.y0, band_lo);
            b.y1 = std::min(b.y1, band_hi);
            if (b.empty()) continue;
            for (std::size_t y = b.y0; y < b.y1; ++y) {
                for (std::size_t x = b.x0; x < b.x1; ++x) {
                    const double c = rect_coverage(r, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, s).value;
                    if (c != 0.0) acc.stroke[y * W + x] *= 1.0 - axis_alpha * c;
                }
            }
        }
    });
}

double mark_alpha(const Accumulators& acc, std::size_t i) { return acc.zeros[i] > 0 ? 1.0 : 1.0 - acc.product[i]; }

std::array<double, 3> base_color(const Layout& layout, double stroke_transmit) {
    std::array<double, 3> out{};
    for (std::size_t c = 0; c < 3; ++c) {
        out[c] = layout.background[c] * stroke_transmit + axis_color[c] * (1.0 - stroke_transmit);
    }
    return out;
}

Image compose(const Layout& layout, const Accumulators& acc) {
    Image img(layout.width, layout.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const double a = mark_alpha(acc, i);
        const auto base = base_color(layout, acc.stroke[i]);
        const double norm = 1.0 / (acc.weight[i] + color_eps);
        for (std::size_t c = 0; c < 3; ++c) {
            const double mark = acc.color[3 * i + c] * norm;
            img.px(i, c) = std::clamp(a * mark + (1.0 - a) * base[c], 0.0, 1.0);
        }
        img.px(i, 3) = a;
    }
    return img;
}

// Reverse pass through compositing. Adds d/d(mark and stroke fields) into
// `adjoint` (indexed by tape node id).
void composite_vjp(const Scene& scene, const Layout& layout, unsigned threads, const Accumulators& acc,
                   const ImageGradient& g, std::vector<double>& adjoint) {
    const std::size_t W = layout.width;
    const std::size_t H = layout.height;
    const std::size_t n = W * H;
    const double s = layout.smoothing;

    // Per-pixel adjoints of the accumulated quantities.
    std::vector<double> g_alpha(n), g_weight(n), g_color(3 * n), g_stroke(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = mark_alpha(acc, i);
        const auto base = base_color(layout, acc.stroke[i]);
        const double norm = 1.0 / (acc.weight[i] + color_eps);
        double ga = g.px(i, 3);
        double gw = 0.0;
        double gs = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double gc = g.px(i, c);
            const double mark = acc.color[3 * i + c] * norm;
            ga += gc * (mark - base[c]);
            const double g_mark = gc * a;
            g_color[3 * i + c] = g_mark * norm;
            gw -= g_mark * mark * norm;
            gs += gc * (1.0 - a) * (layout.background[c] - axis_color[c]);
        }
        g_alpha[i] = ga;
        g_weight[i] = gw;
        g_stroke[i] = gs;
    }

    const std::size_t bands = std::max<std::size_t>(1, std::min<std::size_t>(threads, H));
    std::vector<std::vector<double>> mark_grad(bands, std::vector<double>(scene.marks.size() * mark_fields, 0.0));
    std::vector<std::vector<double>> rect_grad(bands, std::vector<double>(scene.strokes.size() * rect_fields, 0.0));

    parallel_bands(threads, H, [&](std::size_t band_lo, std::size_t band_hi, std::size_t band) {
        auto& mg = mark_grad[band];
        for (std::size_t k = 0; k < scene.marks.size(); ++k) {
            const auto& m = scene.marks[k];
            auto b = mark_bounds(m, s, W, H);
            b.y0 = std::max(b.y0, band_lo);
            b.y1 = std::min(b.y1, band_hi);
            if (b.empty()) continue;
            const double alpha = m.v[f_alpha];
            double* out = &mg[k * mark_fields];
            for (std::size_t y = b.y0; y < b.y1; ++y) {
                const double dy = static_cast<double>(y) + 0.5 - m.v[f_cy];
                for (std::size_t x = b.x0; x < b.x1; ++x) {
                    const double dx = static_cast<double>(x) + 0.5 - m.v[f_cx];
                    const double dist = std::sqrt(dx * dx + dy * dy + distance_eps);
                    const double t = m.v[f_r] - dist;
                    const double c = coverage(t, s);
                    if (c == 0.0) continue;
                    const std::size_t i = y * W + x;
                    const double w = alpha * c;
                    const double f = 1.0 - w;
                    double others;  // product of (1 - w_j) over j != this mark
                    if (f == 0.0) {
                        others = acc.zeros[i] == 1 ? acc.product[i] : 0.0;
                    } else {
                        others = acc.zeros[i] > 0 ? 0.0 : acc.product[i] / f;
                    }
                    const double gq0 = g_color[3 * i];
                    const double gq1 = g_color[3 * i + 1];
                    const double gq2 = g_color[3 * i + 2];
                    const double gw = g_alpha[i] * others + g_weight[i] + gq0 * m.v[f_red] + gq1 * m.v[f_green] +
                                      gq2 * m.v[f_blue];
                    out[f_red] += gq0 * w;
                    out[f_green] += gq1 * w;
                    out[f_blue] += gq2 * w;
                    out[f_alpha] += gw * c;
                    const double gt = gw * alpha * coverage_derivative(t, s);
                    out[f_r] += gt;
                    // d dist / d center = (center - pixel) / dist = -(dx, dy) / dist
                    out[f_cx] += gt * dx / dist;
                    out[f_cy] += gt * dy / dist;
                }
            }
        }
        auto& rg = rect_grad[band];
        for (std::size_t k = 0; k < scene.strokes.size(); ++k) {
            const auto& r = scene.strokes[k];
            auto b = rect_bounds(r, s, W, H);
            b.y0 = std::max(b.y0, band_lo);
            b.y1 = std::min(b.y1, band_hi);
            if (b.empty()) continue;
            double* out = &rg[k * rect_fields];
            for (std::size_t y = b.y0; y < b.y1; ++y) {
                for (std::size_t x = b.x0; x < b.x1; ++x) {
                    const auto rc = rect_coverage(r, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, s);
                    if (rc.value == 0.0) continue;
                    const std::size_t i = y * W + x;
                    const double others = acc.stroke[i] / (1.0 - axis_alpha * rc.value);
                    const double gc = g_stroke[i] * (-axis_alpha * others);
                    for (std::size_t f = 0; f < rect_fields; ++f) out[f] += gc * rc.partial[f];
                }
            }
        }
    });

    for (std::size_t band = 0; band < bands; ++band) {
        for (std::size_t k = 0; k < scene.marks.size(); ++k) {
            for (std::size_t f = 0; f < mark_fields; ++f) {
                adjoint[scene.marks[k].id[f]] += mark_grad[band][k * mark_fields + f];
            }
        }
        for (std::size_t k = 0; k < scene.strokes.size(); ++k) {
            for (std::size_t f = 0; f < rect_fields; ++f) {
                adjoint[scene.strokes[k].id[f]] += rect_grad[band][k * rect_fields + f];
            }
        }
    }
}

// ---------------------------------------------------------------- validation

const params::ParamSpec& need_param(const params::ParamSchema& schema, const std::string& name,
                                    const std::string& role) {
    const auto i = schema.find(name);
    if (!i) throw ValidationError(role + " refers to unknown parameter '" + name + "'");
    return schema.specs()[*i];
}

// Returns (lo, hi) bounds of the operand's values.
std::pair<double, double> check_operand(const Operand& op, const params::ParamSchema& schema, std::size_t min_len,
                                        std::size_t max_len, const std::string& role) {
    if (!op.is_param()) {
        if (op.literal.size() < min_len || op.literal.size() > max_len) {
            throw ValidationError(role + " needs " + std::to_string(min_len) + (min_len == max_len ? "" : "..") +
                                  (min_len == max_len ? "" : std::to_string(max_len)) + " values");
        }
        for (double v : op.literal) {
            if (!std::isfinite(v)) throw ValidationError(role + " has a non-finite value");
        }
        const auto [lo, hi] = std::minmax_element(op.literal.begin(), op.literal.end());
        return {*lo, *hi};
    }
    const auto& spec = need_param(schema, op.param, role);
    if (spec.kind == ParamKind::categorical) throw ValidationError(role + " cannot use categorical '" + op.param + "'");
    if (spec.raw_size() < min_len || spec.raw_size() > max_len) {
        throw ValidationError(role + ": parameter '" + op.param + "' has the wrong length");
    }
    if (spec.kind == ParamKind::unit_interval_vector) return {0.0, 1.0};
    return {spec.lo, spec.hi};
}

void check_map(const EncodingMap& map, const data::Dataset& d, const params::ParamSchema& schema,
               const std::string& role) {
    if (map.attributes.empty()) throw ValidationError(role + " has no attribute");
    for (const auto& name : map.attributes) {
        if (!d.has_attribute(name)) throw ValidationError(role + " refers to unknown attribute '" + name + "'");
        if (d.attribute(d.index_of(name)).kind != data::AttributeKind::quantitative) {
            throw ValidationError(role + " needs a quantitative attribute, '" + name + "' is categorical");
        }
    }
    if (map.attributes.size() > 1) {
        const auto& spec = need_param(schema, map.choice, role + " choice");
        if (spec.kind != ParamKind::categorical || spec.num_options != map.attributes.size()) {
            throw ValidationError(role + " choice '" + map.choice + "' must be categorical with " +
                                  std::to_string(map.attributes.size()) + " options");
        }
    }
    if (map.domain) {
        if (map.domain->is_param()) {
            if (need_param(schema, map.domain->param, role + " domain").kind != ParamKind::ordered_pair) {
                throw ValidationError(role + " domain must be an ordered_pair parameter");
            }
        } else {
            check_operand(*map.domain, schema, 2, 2, role + " domain");
            if (!(map.domain->literal[1] - map.domain->literal[0] >= min_domain_span)) {
                throw ValidationError(role + " domain is degenerate");
            }
        }
    }
    check_operand(map.coeffs, schema, 1, 6, role + " coefficients");
    check_operand(map.range, schema, 2, 2, role + " range");
}

}  // namespace

// ---------------------------------------------------------------- public

double coverage(double t, double s) noexcept {
    const double q = t / s;
    if (q <= taper_end) return 0.0;
    const double sg = sigmoid(q);
    if (q >= taper_start) return sg;
    const double x = (q - taper_end) / (taper_start - taper_end);
    return sg * x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

double coverage_derivative(double t, double s) noexcept {
    const double q = t / s;
    if (q <= taper_end) return 0.0;
    const double sg = sigmoid(q);
    const double dsg = sg * (1.0 - sg);
    if (q >= taper_start) return dsg / s;
    const double x = (q - taper_end) / (taper_start - taper_end);
    const double taper = x * x * x * (x * (6.0 * x - 15.0) + 10.0);
    const double dtaper = 30.0 * x * x * (1.0 - x) * (1.0 - x) / (taper_start - taper_end);
    return (dsg * taper + sg * dtaper) / s;
}

std::array<double, 3> luv_to_rgb(double l, double u, double v) noexcept {
    return {l + 1.13983 * v, l - 0.39465 * u - 0.58060 * v, l + 2.03211 * u};
}

Layout Layout::single(const ChartSpec& chart) {
    Layout layout;
    layout.width = chart.width;
    layout.height = chart.height;
    layout.background = chart.background;
    layout.smoothing = chart.smoothing;
    layout.views.push_back(View{std::nullopt, chart});
    return layout;
}

void validate(const Layout& layout, const data::Dataset& d, const params::ParamSchema& schema) {
    if (layout.width == 0 || layout.height == 0) throw ValidationError("canvas has zero area");
    if (!(layout.smoothing > 0.0)) throw ValidationError("smoothing width must be positive");
    if (layout.views.empty()) throw ValidationError("layout has no views");
    if (!(layout.min_extent > 0.0 && layout.min_extent <= 1.0)) throw ValidationError("min_extent must be in (0,1]");
    if (layout.overlap_weight < 0.0) throw ValidationError("overlap weight must be >= 0");
    if (!(layout.overlap_smoothing > 0.0)) throw ValidationError("overlap smoothing must be positive");
    for (double c : layout.background) {
        if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("background color outside [0,1]");
    }
    for (std::size_t v = 0; v < layout.views.size(); ++v) {
        const auto& view = layout.views[v];
        const std::string role = "view " + std::to_string(v);
        if (view.rect) {
            const auto [lo, hi] = check_operand(*view.rect, schema, 4, 4, role + " rect");
            if (lo < 0.0 || hi > 1.0) throw ValidationError(role + " rect values must lie in [0,1]");
        }
        const auto& chart = view.chart;
        if (!(chart.margin >= 0.0 && chart.margin < 0.5)) throw ValidationError(role + " margin must be in [0,0.5)");
        check_map(chart.x, d, schema, role + " x");
        check_map(chart.y, d, schema, role + " y");
        if (const auto* op = std::get_if<Operand>(&chart.size)) {
            const auto [lo, hi] = check_operand(*op, schema, 1, 1, role + " size");
            if (!(lo > 0.0)) throw ValidationError(role + " radius must be positive");
        } else {
            const auto& map = std::get<EncodingMap>(chart.size);
            check_map(map, d, schema, role + " size");
            const auto [lo, hi] = check_operand(map.range, schema, 2, 2, role + " size range");
            if (lo < 0.0) throw ValidationError(role + " size range must be non-negative");
        }
        if (const auto* op = std::get_if<Operand>(&chart.color)) {
            const auto [lo, hi] = check_operand(*op, schema, 3, 3, role + " color");
            if (lo < 0.0 || hi > 1.0) throw ValidationError(role + " color must lie in [0,1]");
        } else {
            const auto& mc = std::get<MappedColor>(chart.color);
            check_map(mc.map, d, schema, role + " color");
            check_operand(mc.colormap.start, schema, 3, 3, role + " colormap start");
            check_operand(mc.colormap.delta_luminance, schema, 1, 1, role + " colormap delta");
            check_operand(mc.colormap.end_chroma, schema, 2, 2, role + " colormap end");
        }
        const auto [alo, ahi] = check_operand(chart.opacity, schema, 1, 1, role + " opacity");
        if (alo < min_opacity || ahi > 1.0) throw ValidationError(role + " opacity must lie in [0.02, 1]");
    }
}

ChartRenderer::ChartRenderer(data::Dataset d, Layout layout, params::SchemaPtr schema, RenderOptions options)
    : data_(std::move(d)), layout_(std::move(layout)), schema_(std::move(schema)), options_(options) {
    if (!schema_) throw ValidationError("renderer needs a parameter schema");
    validate(layout_, data_, *schema_);
}

Image ChartRenderer::render(const params::RealizedParams& r) const {
    if (r.schema_ptr() != schema_ && r.values().size() != schema_->raw_dim()) {
        throw ValidationError("realized parameters do not match the renderer's schema");
    }
    Inputs in(r);
    const Scene scene = build_scene(layout_, data_, in);
    Accumulators acc(layout_.width * layout_.height);
    accumulate(scene, layout_, options_.threads, acc);
    return compose(layout_, acc);
}

std::vector<double> ChartRenderer::realized_vjp(const params::RealizedParams& r, const ImageGradient& cot) const {
    if (!cot.same_shape(layout_.width, layout_.height)) throw ValidationError("cotangent dimensions do not match image");
    Inputs in(r);
    const Scene scene = build_scene(layout_, data_, in);
    Accumulators acc(layout_.width * layout_.height);
    accumulate(scene, layout_, options_.threads, acc);
    std::vector<double> adjoint(in.tape.size(), 0.0);
    composite_vjp(scene, layout_, options_.threads, acc, cot, adjoint);
    in.tape.propagate(adjoint);
    std::vector<double> out(in.realized.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = adjoint[in.realized[i].id];
    return out;
}

std::vector<double> ChartRenderer::render_vjp(const params::ParamVector& p, const ImageGradient& cot,
                                              const params::ConstrainOptions& options) const {
    if (options.mode == params::Mode::hard && !options.straight_through) {
        throw ValidationError("render_vjp in hard mode requires straight_through");
    }
    const auto r = params::constrain(p, options);
    return params::constrain_vjp(p, realized_vjp(r, cot), options);
}

double ChartRenderer::penalty(const params::RealizedParams& r) const { return layout_penalty(layout_, r); }

std::vector<double> ChartRenderer::penalty_vjp(const params::ParamVector& p,
                                               const params::ConstrainOptions& options) const {
    const auto r = params::constrain(p, options);
    Inputs in(r);
    const Var pen = penalty_var(layout_, in);
    std::vector<double> adjoint(in.tape.size(), 0.0);
    adjoint[pen.id] = 1.0;
    in.tape.propagate(adjoint);
    std::vector<double> cot(in.realized.size());
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = adjoint[in.realized[i].id];
    return params::constrain_vjp(p, cot, options);
}

std::unique_ptr<Visualizer> ChartRenderer::with_dataset(const data::Dataset& d) const {
    return std::make_unique<ChartRenderer>(d, layout_, schema_, options_);
}

std::vector<Rect> ChartRenderer::view_rects(const params::RealizedParams& r) const {
    Inputs in(r);
    std::vector<Rect> out;
    for (const auto& view : layout_.views) {
        const auto v = view_rect(view, layout_, in);
        out.push_back({v[0].value(), v[1].value(), v[2].value(), v[3].value()});
    }
    return out;
}

Image render(const data::Dataset& d, const Layout& layout, const params::RealizedParams& r,
             const RenderOptions& options) {
    return ChartRenderer(d, layout, r.schema_ptr(), options).render(r);
}

Image render(const data::Dataset& d, const ChartSpec& chart, const params::RealizedParams& r,
             const RenderOptions& options) {
    return render(d, Layout::single(chart), r, options);
}

std::vector<double> render_vjp(const data::Dataset& d, const Layout& layout, const params::ParamVector& p,
                               const ImageGradient& cotangent, const params::ConstrainOptions& options,
                               const RenderOptions& render_options) {
    return ChartRenderer(d, layout, p.schema, render_options).render_vjp(p, cotangent, options);
}

double eval_encoding(const EncodingMap& map, double value, const params::RealizedParams& r, Domain fallback) {
    if (!std::isfinite(value)) throw ValidationError("eval_encoding: value is not finite");
    if (!map.domain && fallback.hi - fallback.lo < min_domain_span) {
        throw ValidationError("encoding domain is degenerate (d_hi - d_lo < 1e-9)");
    }
    Inputs in(r);
    MapPlan plan;
    plan.extents.push_back(fallback);
    bind_common(plan, map, in, true);
    return plan.apply_value(in, 0, value).value();
}

double layout_penalty(const Layout& layout, const params::RealizedParams& r) {
    Inputs in(r);
    return penalty_var(layout, in).value();
}

}  // namespace vizgrad::raster
