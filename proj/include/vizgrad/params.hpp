#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vizgrad::params {

enum class ParamKind { bounded_scalar, bounded_vector, ordered_pair, unit_interval_vector, categorical };

std::string_view to_string(ParamKind kind) noexcept;
ParamKind parse_kind(std::string_view text);

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::bounded_scalar;
    double lo = 0.0;            // bounded_scalar, bounded_vector, ordered_pair
    double hi = 1.0;
    std::size_t len = 1;        // bounded_vector, unit_interval_vector
    std::size_t num_options = 2;  // categorical
    double temperature = 0.5;   // categorical

    // Raw coordinates used by this spec. Realized values use the same count.
    [[nodiscard]] std::size_t raw_size() const noexcept;

    static ParamSpec scalar(std::string name, double lo, double hi);
    static ParamSpec vector(std::string name, double lo, double hi, std::size_t len);
    static ParamSpec pair(std::string name, double lo, double hi);
    static ParamSpec unit_vector(std::string name, std::size_t len);
    static ParamSpec choice(std::string name, std::size_t options, double temperature = 0.5);
};

// Ordered list of specs. The raw vector is the concatenation of every spec's
// raw coordinates in declaration order.
class ParamSchema {
public:
    ParamSchema() = default;
    explicit ParamSchema(std::vector<ParamSpec> specs);

    [[nodiscard]] const std::vector<ParamSpec>& specs() const noexcept { return specs_; }
    [[nodiscard]] std::size_t size() const noexcept { return specs_.size(); }
    [[nodiscard]] std::size_t raw_dim() const noexcept { return raw_dim_; }
    [[nodiscard]] std::size_t offset(std::size_t spec) const { return offsets_.at(spec); }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const noexcept;
    [[nodiscard]] std::size_t index_of(std::string_view name) const;
    [[nodiscard]] const ParamSpec& spec(std::string_view name) const { return specs_[index_of(name)]; }

private:
    std::vector<ParamSpec> specs_;
    std::vector<std::size_t> offsets_;
    std::size_t raw_dim_ = 0;
};

using SchemaPtr = std::shared_ptr<const ParamSchema>;

// Unconstrained point where optimizers operate.
struct ParamVector {
    SchemaPtr schema;
    std::vector<double> raw;

    // All-zero raw vector: every bounded value at its midpoint, uniform choices.
    static ParamVector zeros(SchemaPtr schema);
};

enum class Mode { soft, hard };

struct ConstrainOptions {
    Mode mode = Mode::soft;
    // Gumbel noise over the raw layout (only categorical slots are read).
    // Empty means zero noise.
    std::vector<double> noise;
    // Effective temperature is max(spec.temperature * scale, min(floor, spec.temperature)).
    double temperature_scale = 1.0;
    double temperature_floor = 0.0;
    // Hard forward, soft backward.
    bool straight_through = false;
};

// Constrained values, laid out like the raw vector: scalars and vectors in
// [lo, hi], ordered pairs as (a, b), categorical slots as simplex weights
// (one-hot in hard mode, with the chosen index recorded).
class RealizedParams {
public:
    RealizedParams() = default;
    RealizedParams(SchemaPtr schema, std::vector<double> values);

    [[nodiscard]] const ParamSchema& schema() const { return *schema_; }
    [[nodiscard]] const SchemaPtr& schema_ptr() const noexcept { return schema_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    [[nodiscard]] std::span<const double> get(std::string_view name) const;
    [[nodiscard]] double scalar(std::string_view name) const;

    // Hard index of a categorical spec, if it has been committed.
    [[nodiscard]] std::optional<std::size_t> choice(std::size_t spec) const { return choices_.at(spec); }
    void set_choice(std::size_t spec, std::size_t option);

    // Checks bounds, ordering, and simplex constraints.
    void check_invariants(double simplex_tol = 1e-9) const;

private:
    SchemaPtr schema_;
    std::vector<double> values_;
    std::vector<std::optional<std::size_t>> choices_;
};

double sigmoid(double x) noexcept;
double logit(double p) noexcept;
double softplus(double x) noexcept;

// Gumbel(0,1) noise in the categorical slots of a raw-layout vector, drawn
// from the "gumbel" stream at position `draw`.
std::vector<double> gumbel_noise(const ParamSchema& schema, std::uint64_t seed, std::uint64_t draw = 0);

RealizedParams constrain(const ParamVector& p, const ConstrainOptions& options = {});

// Inverse of soft-mode constrain with zero noise. Requires every value
// strictly inside its bounds and soft categorical weights.
ParamVector unconstrain(const RealizedParams& r);

// Gradient wrt raw of <cotangent, constrain(p)>. Soft mode, or hard mode with
// straight_through set.
std::vector<double> constrain_vjp(const ParamVector& p, std::span<const double> cotangent,
                                  const ConstrainOptions& options = {});

// Replace every categorical weight vector by the one-hot of its argmax
// (ties to the lowest index).
RealizedParams harden(const RealizedParams& r);

}  // namespace vizgrad::params
