#include "vizgrad/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vizgrad/error.hpp"
#include "vizgrad/rng.hpp"

namespace vizgrad::params {

namespace {

double effective_temperature(const ParamSpec& s, const ConstrainOptions& o) {
    return std::max(s.temperature * o.temperature_scale, std::min(o.temperature_floor, s.temperature));
}

// softmax((logits + noise) / tau), stable.
void softmax_into(std::span<const double> logits, std::span<const double> noise, double tau,
                  std::span<double> out) {
    double top = -INFINITY;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = (logits[k] + (noise.empty() ? 0.0 : noise[k])) / tau;
        top = std::max(top, out[k]);
    }
    double total = 0.0;
    for (auto& v : out) {
        v = std::exp(v - top);
        total += v;
    }
    for (auto& v : out) v /= total;
}

std::size_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k] > v[best]) best = k;
    }
    return best;
}

void check_raw(const ParamVector& p) {
    if (!p.schema) throw ValidationError("parameter vector has no schema");
    if (p.raw.size() != p.schema->raw_dim()) {
        throw ValidationError("raw vector has length " + std::to_string(p.raw.size()) + ", schema expects " +
                              std::to_string(p.schema->raw_dim()));
    }
    for (std::size_t i = 0; i < p.raw.size(); ++i) {
        if (!std::isfinite(p.raw[i])) throw NumericError("raw parameter " + std::to_string(i) + " is not finite");
    }
}

std::span<const double> noise_slice(const ConstrainOptions& o, std::size_t offset, std::size_t n,
                                    std::size_t raw_dim) {
    if (o.noise.empty()) return {};
    if (o.noise.size() != raw_dim) throw ValidationError("noise vector length does not match schema");
    return std::span<const double>(o.noise).subspan(offset, n);
}

}  // namespace

// ---------------------------------------------------------------- specs

std::string_view to_string(ParamKind kind) noexcept {
    switch (kind) {
    case ParamKind::bounded_scalar: return "bounded_scalar";
    case ParamKind::bounded_vector: return "bounded_vector";
    case ParamKind::ordered_pair: return "ordered_pair";
    case ParamKind::unit_interval_vector: return "unit_interval_vector";
    case ParamKind::categorical: return "categorical";
    }
    return "?";
}

ParamKind parse_kind(std::string_view text) {
    for (auto k : {ParamKind::bounded_scalar, ParamKind::bounded_vector, ParamKind::ordered_pair,
                   ParamKind::unit_interval_vector, ParamKind::categorical}) {
        if (to_string(k) == text) return k;
    }
    throw ValidationError("unknown parameter kind '" + std::string(text) + "'");
}

std::size_t ParamSpec::raw_size() const noexcept {
    switch (kind) {
    case ParamKind::bounded_scalar: return 1;
    case ParamKind::ordered_pair: return 2;
    case ParamKind::bounded_vector:
    case ParamKind::unit_interval_vector: return len;
    case ParamKind::categorical: return num_options;
    }
    return 0;
}

ParamSpec ParamSpec::scalar(std::string name, double lo, double hi) {
    return {std::move(name), ParamKind::bounded_scalar, lo, hi, 1, 2, 0.5};
}
ParamSpec ParamSpec::vector(std::string name, double lo, double hi, std::size_t len) {
    return {std::move(name), ParamKind::bounded_vector, lo, hi, len, 2, 0.5};
}
ParamSpec ParamSpec::pair(std::string name, double lo, double hi) {
    return {std::move(name), ParamKind::ordered_pair, lo, hi, 1, 2, 0.5};
}
ParamSpec ParamSpec::unit_vector(std::string name, std::size_t len) {
    return {std::move(name), ParamKind::unit_interval_vector, 0.0, 1.0, len, 2, 0.5};
}
ParamSpec ParamSpec::choice(std::string name, std::size_t options, double temperature) {
    return {std::move(name), ParamKind::categorical, 0.0, 1.0, 1, options, temperature};
}

ParamSchema::ParamSchema(std::vector<ParamSpec> specs) : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& s = specs_[i];
        if (s.name.empty()) throw ValidationError("parameter with empty name");
        for (std::size_t j = 0; j < i; ++j) {
            if (specs_[j].name == s.name) throw ValidationError("duplicate parameter name '" + s.name + "'");
        }
        switch (s.kind) {
        case ParamKind::bounded_scalar:
        case ParamKind::bounded_vector:
        case ParamKind::ordered_pair:
            if (!(s.lo < s.hi) || !std::isfinite(s.lo) || !std::isfinite(s.hi)) {
                throw ValidationError("parameter '" + s.name + "' needs finite lo < hi");
            }
            break;
        default: break;
        }
        if ((s.kind == ParamKind::bounded_vector || s.kind == ParamKind::unit_interval_vector) && s.len < 1) {
            throw ValidationError("parameter '" + s.name + "' needs len >= 1");
        }
        if (s.kind == ParamKind::categorical) {
            if (s.num_options < 2) throw ValidationError("parameter '" + s.name + "' needs at least 2 options");
            if (!(s.temperature > 0.0)) throw ValidationError("parameter '" + s.name + "' needs temperature > 0");
        }
        offsets_.push_back(raw_dim_);
        raw_dim_ += s.raw_size();
    }
}

std::optional<std::size_t> ParamSchema::find(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (specs_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t ParamSchema::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError("schema has no parameter '" + std::string(name) + "'");
}

ParamVector ParamVector::zeros(SchemaPtr schema) {
    const auto n = schema->raw_dim();
    return ParamVector{std::move(schema), std::vector<double>(n, 0.0)};
}

// ---------------------------------------------------------------- realized

RealizedParams::RealizedParams(SchemaPtr schema, std::vector<double> values)
    : schema_(std::move(schema)), values_(std::move(values)), choices_(schema_->size()) {
    if (values_.size() != schema_->raw_dim()) throw ValidationError("realized vector length does not match schema");
}

std::span<const double> RealizedParams::get(std::string_view name) const {
    const auto i = schema_->index_of(name);
    return std::span<const double>(values_).subspan(schema_->offset(i), schema_->specs()[i].raw_size());
}

double RealizedParams::scalar(std::string_view name) const {
    const auto v = get(name);
    if (v.size() != 1) throw ValidationError("parameter '" + std::string(name) + "' is not a scalar");
    return v[0];
}

void RealizedParams::set_choice(std::size_t spec, std::size_t option) {
    const auto& s = schema_->specs().at(spec);
    if (s.kind != ParamKind::categorical || option >= s.num_options) {
        throw ValidationError("invalid choice for parameter '" + s.name + "'");
    }
    auto w = values_.begin() + static_cast<std::ptrdiff_t>(schema_->offset(spec));
    std::fill(w, w + static_cast<std::ptrdiff_t>(s.num_options), 0.0);
    w[static_cast<std::ptrdiff_t>(option)] = 1.0;
    choices_[spec] = option;
}

void RealizedParams::check_invariants(double simplex_tol) const {
    for (std::size_t i = 0; i < schema_->size(); ++i) {
        const auto& s = schema_->specs()[i];
        const auto v = std::span<const double>(values_).subspan(schema_->offset(i), s.raw_size());
        for (double x : v) {
            if (!std::isfinite(x)) throw NumericError("realized '" + s.name + "' is not finite");
        }
        switch (s.kind) {
        case ParamKind::bounded_scalar:
        case ParamKind::bounded_vector:
            for (double x : v) {
                if (x < s.lo || x > s.hi) throw ValidationError("realized '" + s.name + "' out of bounds");
            }
            break;
        case ParamKind::ordered_pair:
            if (v[0] < s.lo || v[1] > s.hi || v[0] > v[1]) {
                throw ValidationError("realized '" + s.name + "' violates lo <= a <= b <= hi");
            }
            break;
        case ParamKind::unit_interval_vector:
            for (double x : v) {
                if (x < 0.0 || x > 1.0) throw ValidationError("realized '" + s.name + "' outside [0,1]");
            }
            break;
        case ParamKind::categorical: {
            double total = 0.0;
            for (double x : v) {
                if (x < 0.0) throw ValidationError("realized '" + s.name + "' has a negative weight");
                total += x;
            }
            if (std::abs(total - 1.0) > simplex_tol) {
                throw ValidationError("realized '" + s.name + "' weights do not sum to 1");
            }
            break;
        }
        }
    }
}

// ---------------------------------------------------------------- scalar maps

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<double> gumbel_noise(const ParamSchema& schema, std::uint64_t seed, std::uint64_t draw) {
    std::vector<double> g(schema.raw_dim(), 0.0);
    CounterRng rng = CounterRng(seed, "gumbel").substream(draw);
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& s = schema.specs()[i];
        if (s.kind != ParamKind::categorical) continue;
        for (std::size_t k = 0; k < s.num_options; ++k) g[schema.offset(i) + k] = rng.gumbel();
    }
    return g;
}

// ---------------------------------------------------------------- constrain

RealizedParams constrain(const ParamVector& p, const ConstrainOptions& o) {
    check_raw(p);
    const auto& schema = *p.schema;
    std::vector<double> out(schema.raw_dim());
    std::vector<std::optional<std::size_t>> hard(schema.size());

    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& s = schema.specs()[i];
        const std::size_t off = schema.offset(i);
        const auto u = std::span<const double>(p.raw).subspan(off, s.raw_size());
        auto r = std::span<double>(out).subspan(off, s.raw_size());
        switch (s.kind) {
        case ParamKind::bounded_scalar:
        case ParamKind::bounded_vector:
            for (std::size_t k = 0; k < u.size(); ++k) r[k] = s.lo + (s.hi - s.lo) * sigmoid(u[k]);
            break;
        case ParamKind::ordered_pair:
            r[0] = s.lo + (s.hi - s.lo) * sigmoid(u[0]);
            r[1] = r[0] + (s.hi - r[0]) * sigmoid(u[1]);
            break;
        case ParamKind::unit_interval_vector:
            for (std::size_t k = 0; k < u.size(); ++k) r[k] = sigmoid(u[k]);
            break;
        case ParamKind::categorical: {
            const double tau = effective_temperature(s, o);
            if (!(tau > 0.0)) throw ValidationError("parameter '" + s.name + "' has non-positive temperature");
            const auto g = noise_slice(o, off, s.num_options, schema.raw_dim());
            if (o.mode == Mode::soft) {
                softmax_into(u, g, tau, r);
            } else {
                std::vector<double> z(u.begin(), u.end());
                for (std::size_t k = 0; k < z.size() && !g.empty(); ++k) z[k] += g[k];
                const auto best = argmax_lowest(z);
                std::fill(r.begin(), r.end(), 0.0);
                r[best] = 1.0;
                hard[i] = best;
            }
            break;
        }
        }
    }
    RealizedParams result(p.schema, std::move(out));
    for (std::size_t i = 0; i < hard.size(); ++i) {
        if (hard[i]) result.set_choice(i, *hard[i]);
    }
    return result;
}

ParamVector unconstrain(const RealizedParams& r) {
    const auto& schema = r.schema();
    std::vector<double> raw(schema.raw_dim());
    const auto values = r.values();
    auto interior = [](double x, double lo, double hi, const std::string& name) {
        if (!(x > lo && x < hi)) {
            throw ValidationError("realized '" + name + "' is on or outside its bounds; cannot invert");
        }
    };
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& s = schema.specs()[i];
        const std::size_t off = schema.offset(i);
        const auto v = values.subspan(off, s.raw_size());
        auto u = std::span<double>(raw).subspan(off, s.raw_size());
        switch (s.kind) {
        case ParamKind::bounded_scalar:
        case ParamKind::bounded_vector:
            for (std::size_t k = 0; k < v.size(); ++k) {
                interior(v[k], s.lo, s.hi, s.name);
                u[k] = logit((v[k] - s.lo) / (s.hi - s.lo));
            }
            break;
        case ParamKind::ordered_pair:
            interior(v[0], s.lo, s.hi, s.name);
            interior(v[1], v[0], s.hi, s.name);
            u[0] = logit((v[0] - s.lo) / (s.hi - s.lo));
            u[1] = logit((v[1] - v[0]) / (s.hi - v[0]));
            break;
        case ParamKind::unit_interval_vector:
            for (std::size_t k = 0; k < v.size(); ++k) {
                interior(v[k], 0.0, 1.0, s.name);
                u[k] = logit(v[k]);
            }
            break;
        case ParamKind::categorical: {
            if (r.choice(i)) throw ValidationError("categorical '" + s.name + "' is hardened; cannot invert");
            double mean_log = 0.0;
            for (double w : v) {
                if (!(w > 0.0)) throw ValidationError("categorical '" + s.name + "' needs strictly positive weights");
                mean_log += std::log(w);
            }
            mean_log /= static_cast<double>(v.size());
            for (std::size_t k = 0; k < v.size(); ++k) u[k] = s.temperature * (std::log(v[k]) - mean_log);
            break;
        }
        }
    }
    return ParamVector{r.schema_ptr(), std::move(raw)};
}

std::vector<double> constrain_vjp(const ParamVector& p, std::span<const double> cot, const ConstrainOptions& o) {
    check_raw(p);
    const auto& schema = *p.schema;
    if (cot.size() != schema.raw_dim()) throw ValidationError("cotangent length does not match schema");
    if (o.mode == Mode::hard && !o.straight_through) {
        throw ValidationError("hard-mode constrain is not differentiable; enable straight_through");
    }
    std::vector<double> grad(schema.raw_dim(), 0.0);

    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& s = schema.specs()[i];
        const std::size_t off = schema.offset(i);
        const auto u = std::span<const double>(p.raw).subspan(off, s.raw_size());
        const auto c = cot.subspan(off, s.raw_size());
        auto g = std::span<double>(grad).subspan(off, s.raw_size());
        switch (s.kind) {
        case ParamKind::bounded_scalar:
        case ParamKind::bounded_vector:
            for (std::size_t k = 0; k < u.size(); ++k) {
                const double sg = sigmoid(u[k]);
                g[k] = c[k] * (s.hi - s.lo) * sg * (1.0 - sg);
            }
            break;
        case ParamKind::ordered_pair: {
            // a = lo + (hi-lo) s1,  b = a + (hi-a) s2 = a (1-s2) + hi s2
            const double s1 = sigmoid(u[0]);
            const double s2 = sigmoid(u[1]);
            const double a = s.lo + (s.hi - s.lo) * s1;
            const double da_du1 = (s.hi - s.lo) * s1 * (1.0 - s1);
            const double db_du1 = da_du1 * (1.0 - s2);
            const double db_du2 = (s.hi - a) * s2 * (1.0 - s2);
            g[0] = c[0] * da_du1 + c[1] * db_du1;
            g[1] = c[1] * db_du2;
            break;
        }
        case ParamKind::unit_interval_vector:
            for (std::size_t k = 0; k < u.size(); ++k) {
                const double sg = sigmoid(u[k]);
                g[k] = c[k] * sg * (1.0 - sg);
            }
            break;
        case ParamKind::categorical: {
            const double tau = effective_temperature(s, o);
            std::vector<double> w(s.num_options);
            softmax_into(u, noise_slice(o, off, s.num_options, schema.raw_dim()), tau, w);
            double dot = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * c[k];
            for (std::size_t k = 0; k < w.size(); ++k) g[k] = w[k] * (c[k] - dot) / tau;
            break;
        }
        }
    }
    return grad;
}

RealizedParams harden(const RealizedParams& r) {
    RealizedParams out = r;
    const auto& schema = r.schema();
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& s = schema.specs()[i];
        if (s.kind != ParamKind::categorical) continue;
        const auto w = r.values().subspan(schema.offset(i), s.num_options);
        out.set_choice(i, argmax_lowest(w));
    }
    return out;
}

}  // namespace vizgrad::params
