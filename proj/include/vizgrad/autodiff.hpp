#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace vizgrad::ad {

class Tape;

// Handle to a scalar recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    [[nodiscard]] double value() const;
};

// Minimal reverse-mode tape for scalar pipelines. Every node has at most two
// parents and stores the local partials computed during the forward pass.
class Tape {
public:
    static constexpr std::uint32_t none = 0xffffffffu;

    Var input(double v) { return push(v, none, 0.0, none, 0.0); }
    Var constant(double v) { return push(v, none, 0.0, none, 0.0); }

    // y = f(a) with df/da supplied by the caller.
    Var unary(Var a, double value, double da) { return push(value, a.id, da, none, 0.0); }
    // y = f(a, b) with both partials supplied by the caller.
    Var binary(Var a, Var b, double value, double da, double db) { return push(value, a.id, da, b.id, db); }

    [[nodiscard]] double value(std::uint32_t id) const { return nodes_[id].value; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    // Reverse sweep. `adjoint` must have size() entries, seeded at outputs;
    // on return it holds d(seeded sum)/d(node) for every node.
    void propagate(std::span<double> adjoint) const {
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            const double g = adjoint[i];
            if (g == 0.0) continue;
            const Node& n = nodes_[i];
            if (n.a != none) adjoint[n.a] += g * n.da;
            if (n.b != none) adjoint[n.b] += g * n.db;
        }
    }

    void clear() { nodes_.clear(); }
    void reserve(std::size_t n) { nodes_.reserve(n); }

private:
    struct Node {
        double value;
        std::uint32_t a;
        std::uint32_t b;
        double da;
        double db;
    };

    Var push(double v, std::uint32_t a, double da, std::uint32_t b, double db) {
        nodes_.push_back({v, a, b, da, db});
        return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
};

inline double Var::value() const { return tape->value(id); }

inline Var operator+(Var a, Var b) { return a.tape->binary(a, b, a.value() + b.value(), 1.0, 1.0); }
inline Var operator-(Var a, Var b) { return a.tape->binary(a, b, a.value() - b.value(), 1.0, -1.0); }
inline Var operator*(Var a, Var b) { return a.tape->binary(a, b, a.value() * b.value(), b.value(), a.value()); }
inline Var operator/(Var a, Var b) {
    const double inv = 1.0 / b.value();
    return a.tape->binary(a, b, a.value() * inv, inv, -a.value() * inv * inv);
}
inline Var operator-(Var a) { return a.tape->unary(a, -a.value(), -1.0); }

inline Var operator+(Var a, double c) { return a.tape->unary(a, a.value() + c, 1.0); }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a.tape->unary(a, a.value() - c, 1.0); }
inline Var operator-(double c, Var a) { return a.tape->unary(a, c - a.value(), -1.0); }
inline Var operator*(Var a, double c) { return a.tape->unary(a, a.value() * c, c); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, Var a) { return a.tape->unary(a, c / a.value(), -c / (a.value() * a.value())); }

inline Var exp(Var a) {
    const double e = std::exp(a.value());
    return a.tape->unary(a, e, e);
}
inline Var log(Var a) { return a.tape->unary(a, std::log(a.value()), 1.0 / a.value()); }
inline Var sqrt(Var a) {
    const double s = std::sqrt(a.value());
    return a.tape->unary(a, s, 0.5 / s);
}
inline Var tanh(Var a) {
    const double t = std::tanh(a.value());
    return a.tape->unary(a, t, 1.0 - t * t);
}
inline Var sigmoid(Var a) {
    const double x = a.value();
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return a.tape->unary(a, s, s * (1.0 - s));
}
inline Var softplus(Var a) {
    const double x = a.value();
    const double v = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return a.tape->unary(a, v, s);
}

}  // namespace vizgrad::ad
