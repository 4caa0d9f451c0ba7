#include "vizgrad/judge.hpp"

#include <cmath>

#include "vizgrad/error.hpp"
#include "vizgrad/params.hpp"

namespace vizgrad::judge {

using params::sigmoid;

void Goal::check() const {
    if (text.empty()) throw ValidationError("goal text must not be empty");
}

void Judgment::check(const Image& img) const {
    if (!std::isfinite(score)) throw NumericError("judge returned a non-finite score");
    if (!log_density && (score < 0.0 || score > 1.0)) throw NumericError("judge score outside [0,1]");
    if (pixel_gradient && !pixel_gradient->same_shape(img.width(), img.height())) {
        throw ValidationError("judge gradient dimensions do not match image");
    }
}

std::string_view to_string(Choice c) noexcept {
    switch (c) {
    case Choice::first: return "first";
    case Choice::second: return "second";
    case Choice::tie: return "tie";
    }
    return "?";
}

double mean_alpha(const Image& img) {
    double total = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) total += img.px(i, 3);
    return total / static_cast<double>(img.pixel_count());
}

double overplot_fraction(const Image& img, const OverplotParams& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) total += sigmoid(p.sharpness * (img.px(i, 3) - p.threshold));
    return total / static_cast<double>(img.pixel_count());
}

Judgment judge_overplot(const Image& img, const OverplotParams& p) {
    const auto n = static_cast<double>(img.pixel_count());
    ImageGradient grad(img.width(), img.height());
    double total = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const double s = sigmoid(p.sharpness * (img.px(i, 3) - p.threshold));
        total += s;
        grad.px(i, 3) = -p.sharpness * s * (1.0 - s) / n;
    }
    Judgment j;
    j.score = 1.0 - total / n;
    j.pixel_gradient = std::move(grad);
    return j;
}

Judgment judge_ink(const Image& img, double target) {
    if (!(target > 0.0 && target < 1.0)) throw ValidationError("ink target must lie in (0,1)");
    const auto n = static_cast<double>(img.pixel_count());
    const double rho = mean_alpha(img);
    const double score = std::exp(-(rho - target) * (rho - target) / 0.02);
    const double d_rho = score * (-2.0 * (rho - target) / 0.02);
    ImageGradient grad(img.width(), img.height());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) grad.px(i, 3) = d_rho / n;
    Judgment j;
    j.score = score;
    j.pixel_gradient = std::move(grad);
    return j;
}

Judgment judge_contrast(const Image& img, const ContrastParams& p) {
    if (!(p.scale > 0.0)) throw ValidationError("contrast scale must be positive");
    constexpr double eps = 1e-12;
    const auto n = static_cast<double>(img.pixel_count());
    ImageGradient grad(img.width(), img.height());
    double total = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        double sq = 0.0;
        for (std::size_t c = 0; c < 3; ++c) sq += (img.px(i, c) - p.background[c]) * (img.px(i, c) - p.background[c]);
        // sqrt(sq + eps) - sqrt(eps) is exactly zero at the background color.
        const double root = std::sqrt(sq + eps);
        const double dist = root - std::sqrt(eps);
        const double a = img.px(i, 3);
        total += a * dist;
        grad.px(i, 3) = dist;
        for (std::size_t c = 0; c < 3; ++c) grad.px(i, c) = a * (img.px(i, c) - p.background[c]) / root;
    }
    const double m = total / n;
    const double score = std::tanh(m / p.scale);
    const double d_m = (1.0 - score * score) / p.scale / n;
    for (auto& g : grad.data()) g *= d_m;
    Judgment j;
    j.score = score;
    j.pixel_gradient = std::move(grad);
    return j;
}

std::unique_ptr<ScoringJudge> make_overplot_judge(OverplotParams p) {
    if (!(p.threshold > 0.0 && p.threshold < 1.0)) throw ValidationError("overplot threshold must lie in (0,1)");
    if (!(p.sharpness > 0.0)) throw ValidationError("overplot sharpness must be positive");
    return std::make_unique<FunctionJudge>([p](const Image& img) { return judge_overplot(img, p); }, true);
}

std::unique_ptr<ScoringJudge> make_ink_judge(double target) {
    if (!(target > 0.0 && target < 1.0)) throw ValidationError("ink target must lie in (0,1)");
    return std::make_unique<FunctionJudge>([target](const Image& img) { return judge_ink(img, target); }, true);
}

std::unique_ptr<ScoringJudge> make_contrast_judge(ContrastParams p) {
    return std::make_unique<FunctionJudge>([p](const Image& img) { return judge_contrast(img, p); }, true);
}

ScalarComparativeJudge::ScalarComparativeJudge(Fn f, double tie_eps) : f_(std::move(f)), tie_eps_(tie_eps) {
    if (!(tie_eps >= 0.0)) throw ValidationError("tie_eps must be >= 0");
}

Preference ScalarComparativeJudge::compare(const Image& first, const Image& second, const Goal&) {
    ++calls_;
    const double diff = f_(first) - f_(second);
    Preference p;
    if (std::abs(diff) <= tie_eps_) {
        p.choice = Choice::tie;
    } else {
        p.choice = diff > 0.0 ? Choice::first : Choice::second;
    }
    p.confidence = 1.0;
    return p;
}

std::unique_ptr<ComparativeJudge> mock_comparative_from_scalar(ScalarComparativeJudge::Fn f, double tie_eps) {
    return std::make_unique<ScalarComparativeJudge>(std::move(f), tie_eps);
}

}  // namespace vizgrad::judge
