#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "vizgrad/image.hpp"

namespace vizgrad::judge {

enum class GoalKind { pattern, aesthetic, task };

// The user's objective, as text plus optional numeric targets.
struct Goal {
    std::string text;
    GoalKind kind = GoalKind::pattern;
    std::map<std::string, double> targets;

    void check() const;
};

struct Judgment {
    double score = 0.0;
    bool log_density = false;                     // score is a log-density, not in [0,1]
    std::optional<ImageGradient> pixel_gradient;  // d score / d pixel, differentiable judges only
    std::string rationale;

    void check(const Image& img) const;
};

enum class Choice { first, second, tie };

struct Preference {
    Choice choice = Choice::tie;
    std::optional<double> confidence;
    std::string rationale;
};

std::string_view to_string(Choice c) noexcept;

// Maps an image to a scalar judgment. Differentiable judges also fill
// Judgment::pixel_gradient.
class ScoringJudge {
public:
    virtual ~ScoringJudge() = default;
    [[nodiscard]] virtual bool differentiable() const noexcept = 0;
    virtual Judgment judge(const Image& img, const Goal& goal) = 0;
    // Judge invocations (transport requests for remote judges) so far.
    [[nodiscard]] virtual std::size_t calls() const noexcept = 0;
};

// Pairwise forced choice between two images.
class ComparativeJudge {
public:
    virtual ~ComparativeJudge() = default;
    virtual Preference compare(const Image& first, const Image& second, const Goal& goal) = 0;
    // Underlying scalar, when the judge is backed by one (mocks).
    virtual std::optional<double> underlying_score(const Image&) { return std::nullopt; }
    [[nodiscard]] virtual std::size_t calls() const noexcept = 0;
};

// ---------------------------------------------------------------- analytic

// Overplotting surrogate: f = mean_p sigmoid(k (A(p) - A*)), score = 1 - f.
struct OverplotParams {
    double threshold = 0.9;
    double sharpness = 50.0;
};
Judgment judge_overplot(const Image& img, const OverplotParams& p = {});
// Overplot fraction f alone.
double overplot_fraction(const Image& img, const OverplotParams& p = {});

// Ink surrogate: rho = mean A(p), score = exp(-(rho - rho*)^2 / 0.02).
Judgment judge_ink(const Image& img, double target);

// Contrast surrogate: m = mean_p A(p) * |rgb(p) - background|,
// score = tanh(m / scale).
struct ContrastParams {
    std::array<double, 3> background = {1.0, 1.0, 1.0};
    double scale = 0.1;
};
Judgment judge_contrast(const Image& img, const ContrastParams& p);

// ScoringJudge adapter around a differentiable image functional.
class FunctionJudge final : public ScoringJudge {
public:
    using Fn = std::function<Judgment(const Image&)>;
    FunctionJudge(Fn fn, bool differentiable) : fn_(std::move(fn)), differentiable_(differentiable) {}

    [[nodiscard]] bool differentiable() const noexcept override { return differentiable_; }
    Judgment judge(const Image& img, const Goal&) override {
        ++calls_;
        return fn_(img);
    }
    [[nodiscard]] std::size_t calls() const noexcept override { return calls_; }

private:
    Fn fn_;
    bool differentiable_;
    std::size_t calls_ = 0;
};

std::unique_ptr<ScoringJudge> make_overplot_judge(OverplotParams p = {});
std::unique_ptr<ScoringJudge> make_ink_judge(double target);
std::unique_ptr<ScoringJudge> make_contrast_judge(ContrastParams p);

// Deterministic comparative judge: FIRST/SECOND by the sign of f(a) - f(b),
// TIE when |f(a) - f(b)| <= tie_eps.
class ScalarComparativeJudge final : public ComparativeJudge {
public:
    using Fn = std::function<double(const Image&)>;
    ScalarComparativeJudge(Fn f, double tie_eps);

    Preference compare(const Image& first, const Image& second, const Goal& goal) override;
    std::optional<double> underlying_score(const Image& img) override { return f_(img); }
    [[nodiscard]] std::size_t calls() const noexcept override { return calls_; }

private:
    Fn f_;
    double tie_eps_;
    std::size_t calls_ = 0;
};

std::unique_ptr<ComparativeJudge> mock_comparative_from_scalar(ScalarComparativeJudge::Fn f, double tie_eps);

// Mean of the alpha channel.
double mean_alpha(const Image& img);

}  // namespace vizgrad::judge
