// Helpers shared by the unit tests and the acceptance runner.
#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <string>
#include <vector>

#include "vizgrad/judge.hpp"
#include "vizgrad/params.hpp"
#include "vizgrad/raster.hpp"
#include "vizgrad/rng.hpp"
#include "vizgrad/remote.hpp"
#include "vizgrad/visualizer.hpp"

namespace testing {

using namespace vizgrad;

inline std::string fixture(const std::string& name) { return std::string(VIZGRAD_FIXTURES) + "/" + name; }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vizgrad-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Lower and upper realized bound of every raw coordinate (continuous kinds).
inline std::vector<std::pair<double, double>> coordinate_bounds(const params::ParamSchema& schema) {
    std::vector<std::pair<double, double>> out;
    for (const auto& s : schema.specs()) {
        const bool unit = s.kind == params::ParamKind::unit_interval_vector;
        for (std::size_t i = 0; i < s.raw_size(); ++i) out.emplace_back(unit ? 0.0 : s.lo, unit ? 1.0 : s.hi);
    }
    return out;
}

// Visualizer that writes each realized coordinate, rescaled to [0,1], into
// the alpha channel of one pixel of a (raw_dim x 1) image. Lets a test wire
// an arbitrary objective over parameters through the judge interface.
class ProbeVisualizer final : public Visualizer {
public:
    explicit ProbeVisualizer(params::SchemaPtr schema) : schema_(std::move(schema)) {
        for (const auto& s : schema_->specs()) {
            if (s.kind == params::ParamKind::categorical) throw std::invalid_argument("probe: continuous kinds only");
        }
        bounds_ = coordinate_bounds(*schema_);
    }

    [[nodiscard]] const params::SchemaPtr& schema() const override { return schema_; }

    [[nodiscard]] Image render(const params::RealizedParams& r) const override {
        Image img(bounds_.size(), 1);
        const auto v = r.values();
        for (std::size_t i = 0; i < bounds_.size(); ++i) {
            img.px(i, 3) = (v[i] - bounds_[i].first) / (bounds_[i].second - bounds_[i].first);
        }
        return img;
    }

    [[nodiscard]] std::vector<double> render_vjp(const params::ParamVector& p, const ImageGradient& cot,
                                                 const params::ConstrainOptions& options) const override {
        std::vector<double> g(bounds_.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = cot.px(i, 3) / (bounds_[i].second - bounds_[i].first);
        return params::constrain_vjp(p, g, options);
    }

private:
    params::SchemaPtr schema_;
    std::vector<std::pair<double, double>> bounds_;
};

// Objective over the alpha channel of a probe image: returns the score and
// fills d score / d alpha.
using AlphaObjective = std::function<double(const std::vector<double>& alpha, std::vector<double>& grad)>;

class ProbeJudge final : public judge::ScoringJudge {
public:
    ProbeJudge(AlphaObjective f, bool differentiable = true) : f_(std::move(f)), differentiable_(differentiable) {}

    [[nodiscard]] bool differentiable() const noexcept override { return differentiable_; }
    judge::Judgment judge(const Image& img, const judge::Goal&) override {
        ++calls_;
        std::vector<double> alpha(img.pixel_count()), grad(img.pixel_count(), 0.0);
        for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = img.px(i, 3);
        judge::Judgment j;
        j.score = f_(alpha, grad);
        if (differentiable_) {
            ImageGradient g(img.width(), img.height());
            for (std::size_t i = 0; i < grad.size(); ++i) g.px(i, 3) = grad[i];
            j.pixel_gradient = std::move(g);
        }
        return j;
    }
    [[nodiscard]] std::size_t calls() const noexcept override { return calls_; }

private:
    AlphaObjective f_;
    bool differentiable_;
    std::size_t calls_ = 0;
};

// Objective of the raw coordinate u_i = logit(alpha_i) of a unit-interval
// probe: f(u) and its gradient in u, converted to alpha.
inline AlphaObjective over_raw(std::function<double(const std::vector<double>& u, std::vector<double>& du)> f) {
    return [f = std::move(f)](const std::vector<double>& alpha, std::vector<double>& grad) {
        std::vector<double> u(alpha.size()), du(alpha.size(), 0.0);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::log(alpha[i] / (1.0 - alpha[i]));
        const double s = f(u, du);
        for (std::size_t i = 0; i < u.size(); ++i) grad[i] = du[i] / (alpha[i] * (1.0 - alpha[i]));
        return s;
    };
}

inline params::SchemaPtr unit_schema(std::size_t n) {
    return std::make_shared<const params::ParamSchema>(
        std::vector<params::ParamSpec>{params::ParamSpec::unit_vector("u", n)});
}

// Central-difference gradient of f at x.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double rel_error(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Runs the CLI; returns its exit status. stderr goes to `err_path`.
inline int run_cli(const std::string& args, const std::string& err_path = "/dev/null") {
    const std::string cmd = std::string(VIZGRAD_CLI) + " " + args + " >/dev/null 2>" + err_path;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Attribute-assignment fixture: 60 items with attributes a (two tight
// clumps), b (uniform) and c (four levels). Categorical "xattr" picks the
// x attribute and "sattr" the size attribute among `attributes`; y shows b.
// The ink judge scores it.
struct DiscreteFixture {
    params::SchemaPtr schema;
    std::unique_ptr<raster::ChartRenderer> renderer;
    std::unique_ptr<judge::ScoringJudge> judge;
    std::vector<std::string> attributes;
};

inline data::Dataset discrete_dataset() {
    CounterRng rng(11, "fixture");
    std::vector<double> a, b, c;
    for (int i = 0; i < 60; ++i) {
        a.push_back((i % 2) * 1.0 + 0.02 * rng.normal());
        b.push_back(rng.uniform());
        c.push_back((i % 4) / 3.0 + 0.02 * rng.normal());
    }
    return data::Dataset::from_columns({{"a", data::AttributeKind::quantitative, a, {}},
                                        {"b", data::AttributeKind::quantitative, b, {}},
                                        {"c", data::AttributeKind::quantitative, c, {}}});
}

inline DiscreteFixture discrete_fixture(std::vector<std::string> attributes) {
    DiscreteFixture f;
    const auto k = attributes.size();
    f.schema = std::make_shared<const params::ParamSchema>(
        std::vector<params::ParamSpec>{params::ParamSpec::choice("xattr", k, 1.0), params::ParamSpec::choice("sattr", k, 1.0)});
    raster::ChartSpec chart;
    chart.width = chart.height = 64;
    chart.axes = false;
    chart.x.attributes = attributes;
    chart.x.choice = "xattr";
    chart.y.attributes = {"b"};
    raster::EncodingMap size;
    size.attributes = attributes;
    size.choice = "sattr";
    size.range = raster::Operand::fixed({1.0, 6.0});
    chart.size = size;
    chart.opacity = raster::Operand::fixed({0.6});
    f.renderer = std::make_unique<raster::ChartRenderer>(discrete_dataset(), chart, f.schema);
    f.judge = judge::make_ink_judge(0.3);
    f.attributes = std::move(attributes);
    return f;
}

// One-hot realized point for assignment (x option i, size option j).
inline params::RealizedParams assignment(const params::SchemaPtr& schema, std::size_t i, std::size_t j) {
    const std::size_t k = schema->specs()[0].num_options;
    std::vector<double> v(2 * k, 0.0);
    v[i] = 1.0;
    v[k + j] = 1.0;
    return params::RealizedParams(schema, v);
}

// Three images and a scripted judge behind the bundled transcript
// fixtures/judge_transcript.jsonl. Score replies: A parses, B does not, C
// sits on the upper boundary. Comparisons: A vs B agrees under swapping
// (SECOND), A vs C contradicts itself (FIRST both ways).
inline std::array<Image, 3> transcript_images() {
    return {solid_image(16, 16, {0.2, 0.3, 0.8, 0.2}), solid_image(16, 16, {0.2, 0.3, 0.8, 0.5}),
            solid_image(16, 16, {0.2, 0.3, 0.8, 0.8})};
}

inline remote::RemoteJudgeConfig transcript_config() {
    remote::RemoteJudgeConfig cfg;
    cfg.max_concurrency = 1;
    cfg.sleep = [](std::chrono::milliseconds) {};
    return cfg;
}

inline std::string scripted_reply(const remote::Request& req) {
    const auto imgs = transcript_images();
    auto which = [&](const std::string& b64) {
        for (std::size_t i = 0; i < imgs.size(); ++i) {
            if (base64_encode(encode_png(imgs[i])) == b64) return static_cast<int>(i);
        }
        return -1;
    };
    if (req.images.size() == 1) {
        switch (which(req.images[0])) {
        case 0: return "Score: 0.85 because the clusters stay visible";
        case 1: return "great chart!";
        case 2: return "1.0";
        default: return "0.5";
        }
    }
    const int a = which(req.images[0]);
    const int b = which(req.images[1]);
    if (a == 0 && b == 1) return "SECOND - less overplotting";
    if (a == 1 && b == 0) return "FIRST, it has less overplotting";
    if ((a == 0 && b == 2) || (a == 2 && b == 0)) return "FIRST";
    return "TIE";
}

}  // namespace testing
