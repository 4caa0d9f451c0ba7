#include <doctest.h>

#include <json.hpp>

#include "support.hpp"
#include "vizgrad/error.hpp"
#include "vizgrad/optim.hpp"
#include "vizgrad/raster.hpp"
#include "vizgrad/remote.hpp"
#include "vizgrad/rng.hpp"

using namespace vizgrad;
using namespace vizgrad::optim;
using params::ParamVector;

namespace {

const judge::Goal goal{"maximize", judge::GoalKind::pattern, {}};

using RawFn = std::function<double(const std::vector<double>& u, std::vector<double>& du)>;

// Judge-interface wiring of an objective over the raw coordinates of a
// unit-interval probe.
struct RawProblem {
    params::SchemaPtr schema;
    testing::ProbeVisualizer vis;
    testing::ProbeJudge judge;

    RawProblem(std::size_t n, RawFn f, bool differentiable = true)
        : schema(testing::unit_schema(n)), vis(schema), judge(testing::over_raw(std::move(f)), differentiable) {}

    Objective objective() {
        Objective o;
        o.visualizer = &vis;
        o.scorer = &judge;
        o.goal = goal;
        return o;
    }
};

double norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

RawFn gaussian_bump(std::vector<double> center, double width = 1.0) {
    return [center, width](const std::vector<double>& u, std::vector<double>& du) {
        double d2 = 0;
        for (std::size_t i = 0; i < u.size(); ++i) d2 += (u[i] - center[i]) * (u[i] - center[i]);
        const double f = std::exp(-d2 / width);
        for (std::size_t i = 0; i < u.size(); ++i) du[i] = -2.0 * (u[i] - center[i]) / width * f;
        return f;
    };
}

RawFn concave_1d() {
    return [](const std::vector<double>& u, std::vector<double>& du) {
        du[0] = -2.0 * (u[0] - 3.0) / 25.0;
        return std::clamp(1.0 - (u[0] - 3.0) * (u[0] - 3.0) / 25.0, 0.0, 1.0);
    };
}

double decoded_u(const Image& img) { return params::logit(img.px(0, 3)); }

void check_best_is_running_max(const Trace& t) {
    std::optional<double> best = t.initial_score;
    if (t.records.empty()) return;
    if (t.records.front().iteration == 0 && !t.initial_score) best.reset();
    for (const auto& r : t.records) {
        if (r.score && (!best || *r.score > *best)) best = r.score;
    }
    REQUIRE(best);
    CHECK(*t.best_score == *best);
}

}  // namespace

TEST_CASE("config checks") {
    OptimizerConfig c;
    CHECK_NOTHROW(c.check());
    c.window = 1;
    CHECK_THROWS_AS(c.check(), ValidationError);
    c = {};
    c.step = 0.0;
    CHECK_THROWS_AS(c.check(), ValidationError);
    c = {};
    c.shrink = 1.0;
    CHECK_THROWS_AS(c.check(), ValidationError);
    CHECK(parse_optimizer_kind("spsa") == OptimizerKind::spsa);
    CHECK_THROWS_AS(parse_optimizer_kind("newton"), ValidationError);
}

TEST_CASE("gradient ascent reaches the optimum of a smooth bump") {
    CounterRng rng(21, "target");
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> target(8);
        for (auto& v : target) v = -2.0 + 4.0 * rng.uniform();
        RawProblem prob(8, gaussian_bump(target, 8.0));
        OptimizerConfig cfg;
        cfg.max_iters = 500;
        cfg.step = 0.05;
        cfg.tolerance = 1e-12;
        const auto t = optimize_gradient(prob.objective(), ParamVector::zeros(prob.schema), cfg);
        CHECK(t.status != Status::error);
        CHECK(t.records.size() <= 500);
        CHECK(norm_diff(t.final_raw, target) <= 1e-2);
        CHECK(t.judge_calls == t.records.size());
        CHECK(prob.judge.calls() == t.judge_calls);
        check_best_is_running_max(t);
    }
}

TEST_CASE("a flat judge leaves the parameters alone") {
    RawProblem prob(3, [](const std::vector<double>&, std::vector<double>&) { return 0.5; });
    OptimizerConfig cfg;
    cfg.max_iters = 40;
    const ParamVector p0{prob.schema, {0.3, -1.0, 2.0}};
    const auto t = optimize_gradient(prob.objective(), p0, cfg);
    CHECK(t.final_raw == p0.raw);
    CHECK(t.status == Status::converged);
}

TEST_CASE("gradient optimizer rejects judges without gradients") {
    RawProblem prob(2, gaussian_bump({0, 0}), false);
    CHECK_THROWS_AS(optimize_gradient(prob.objective(), ParamVector::zeros(prob.schema), {}), ValidationError);
}

TEST_CASE("a non-finite gradient stops the run with the iteration recorded") {
    int calls = 0;
    RawProblem prob(2, [&](const std::vector<double>& u, std::vector<double>& du) {
        du[0] = ++calls == 4 ? std::nan("") : -u[0];
        du[1] = -u[1];
        return 0.5;
    });
    const auto t = optimize_gradient(prob.objective(), ParamVector::zeros(prob.schema), {});
    CHECK(t.status == Status::error);
    CHECK(t.error_code == ExitCode::numeric);
    REQUIRE(t.records.size() == 4);
    CHECK(t.records.back().iteration == 3);
    CHECK(t.records.back().note.find("non-finite") != std::string::npos);
}

TEST_CASE("converged realized values do not depend on the parameter bounds") {
    auto run = [](double scale) {
        auto schema = std::make_shared<const params::ParamSchema>(std::vector<params::ParamSpec>{
            params::ParamSpec::scalar("a", -1.0 * scale, 3.0 * scale), params::ParamSpec::scalar("b", 0.5 * scale, 2.0 * scale)});
        testing::ProbeVisualizer vis(schema);
        // The objective sees each value as a fraction of its bounds.
        const std::vector<double> want{0.3, 0.8};
        testing::ProbeJudge judge([&](const std::vector<double>& alpha, std::vector<double>& g) {
            double d2 = 0;
            for (std::size_t i = 0; i < 2; ++i) d2 += (alpha[i] - want[i]) * (alpha[i] - want[i]);
            const double f = std::exp(-d2 / 0.05);
            for (std::size_t i = 0; i < 2; ++i) g[i] = -2.0 * (alpha[i] - want[i]) / 0.05 * f;
            return f;
        });
        Objective o;
        o.visualizer = &vis;
        o.scorer = &judge;
        OptimizerConfig cfg;
        cfg.max_iters = 400;
        cfg.tolerance = 1e-12;
        const auto t = optimize_gradient(o, ParamVector::zeros(schema), cfg);
        const auto r = params::constrain({schema, t.final_raw});
        return std::vector<double>{r.values()[0] / scale, r.values()[1] / scale};
    };
    const auto a = run(1.0);
    const auto b = run(2.0);
    CHECK(std::abs(a[0] - b[0]) <= 1e-2);
    CHECK(std::abs(a[1] - b[1]) <= 1e-2);
    CHECK(std::abs(a[0] - (-1.0 + 4.0 * 0.3)) <= 0.05);
}

TEST_CASE("SPSA climbs a concave 1-D score within 300 judge calls") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RawProblem prob(1, concave_1d(), false);
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::spsa;
        cfg.step = 10.0;
        cfg.perturbation = 0.1;
        cfg.judge_budget = 300;
        cfg.max_iters = 1000;
        cfg.tolerance = 0.0;
        cfg.seed = seed;
        const auto t = optimize_spsa(prob.objective(), ParamVector::zeros(prob.schema), cfg);
        CAPTURE(seed);
        CHECK(std::abs(t.final_raw[0] - 3.0) <= 0.05);
        CHECK(t.judge_calls <= 300);
        CHECK(t.judge_calls == 1 + 2 * t.records.size());
        CHECK(prob.judge.calls() == t.judge_calls);
        CHECK(t.status == Status::judge_budget);
        check_best_is_running_max(t);
    }
}

TEST_CASE("SPSA flags probes that keep returning the same score") {
    RawProblem prob(2, [](const std::vector<double>&, std::vector<double>&) { return 1.0; }, false);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::spsa;
    cfg.max_iters = 15;
    cfg.window = 100;
    const auto t = optimize_spsa(prob.objective(), ParamVector::zeros(prob.schema), cfg);
    CHECK(t.stall_warning);
    CHECK(t.records[9].note.find("stall") != std::string::npos);
    CHECK(t.records[8].note.empty());
}

TEST_CASE("SPSA is deterministic for a seed") {
    auto run = [](std::uint64_t seed) {
        RawProblem prob(4, gaussian_bump({1, -1, 0.5, 0}, 4.0), false);
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::spsa;
        cfg.max_iters = 30;
        cfg.seed = seed;
        return trace_jsonl(optimize_spsa(prob.objective(), ParamVector::zeros(prob.schema), cfg));
    };
    CHECK(run(3) == run(3));
    CHECK(run(3) != run(4));
}

TEST_CASE("comparative search converges on a 1-D unimodal preference") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto schema = testing::unit_schema(1);
        testing::ProbeVisualizer vis(schema);
        judge::ScalarComparativeJudge mock([](const Image& img) { return -std::pow(decoded_u(img) - 3.0, 2); }, 1e-9);
        Objective o;
        o.visualizer = &vis;
        o.comparer = &mock;
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::comparative;
        cfg.judge_budget = 200;
        cfg.max_iters = 1000;
        cfg.tolerance = 0.0;
        cfg.seed = seed;
        const auto t = optimize_comparative(o, ParamVector::zeros(schema), cfg);
        CAPTURE(seed);
        CHECK(std::abs(t.final_raw[0] - 3.0) <= 0.05);
        CHECK(t.judge_calls <= 200);
        CHECK(t.judge_calls == mock.calls());

        double last = -INFINITY;
        for (const auto& r : t.records) {
            if (!*r.accepted) continue;
            CHECK(*r.score > last);
            last = *r.score;
        }
        check_best_is_running_max(t);
    }
}

TEST_CASE("an always-tie judge never moves and keeps shrinking the step") {
    auto schema = testing::unit_schema(2);
    testing::ProbeVisualizer vis(schema);
    judge::ScalarComparativeJudge tie([](const Image&) { return 0.0; }, 1.0);
    Objective o;
    o.visualizer = &vis;
    o.comparer = &tie;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::comparative;
    cfg.max_iters = 50;
    cfg.window = 1000;
    const ParamVector p0{schema, {0.5, -0.5}};
    const auto t = optimize_comparative(o, p0, cfg);
    CHECK(t.final_raw == p0.raw);
    CHECK(t.acceptances == 0);
    CHECK(t.zero_acceptance);
    for (std::size_t i = 1; i < t.records.size(); ++i) {
        CHECK(*t.records[i].step == doctest::Approx(*t.records[i - 1].step * 0.95));
    }
}

TEST_CASE("comparative search finds the best attribute assignment") {
    // Two attributes on the two positional channels; y is compressed so the
    // assignments are not mirror images of each other.
    auto schema = std::make_shared<const params::ParamSchema>(std::vector<params::ParamSpec>{
        params::ParamSpec::choice("xattr", 2, 1.0), params::ParamSpec::choice("yattr", 2, 1.0)});
    raster::ChartSpec chart;
    chart.width = chart.height = 64;
    chart.axes = false;
    chart.x.attributes = chart.y.attributes = {"a", "b"};
    chart.x.choice = "xattr";
    chart.y.choice = "yattr";
    chart.y.coeffs = raster::Operand::fixed({-1.0, 2.0});
    chart.opacity = raster::Operand::fixed({0.6});
    raster::ChartRenderer renderer(testing::discrete_dataset(), chart, schema);
    auto ink = judge::make_ink_judge(0.3);

    std::vector<double> scores;
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            scores.push_back(ink->judge(renderer.render(testing::assignment(schema, i, j)), goal).score);
        }
    }
    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    auto sorted = scores;
    std::sort(sorted.rbegin(), sorted.rend());
    REQUIRE(sorted[0] - sorted[1] > 1e-3);

    judge::ScalarComparativeJudge mock([&](const Image& img) { return judge::judge_ink(img, 0.3).score; }, 1e-12);
    Objective o;
    o.visualizer = &renderer;
    o.comparer = &mock;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::comparative;
        cfg.max_iters = 60;
        cfg.seed = seed;
        const auto t = optimize_comparative(o, ParamVector::zeros(schema), cfg);
        const auto h = committed({schema, t.final_raw});
        CAPTURE(seed);
        CHECK(*h.choice(0) * 2 + *h.choice(1) == best);
    }
}

TEST_CASE("a zero budget makes no judge calls") {
    RawProblem prob(2, gaussian_bump({0.5, 0.5}));
    OptimizerConfig cfg;
    cfg.judge_budget = 0;
    const auto g = optimize_gradient(prob.objective(), ParamVector::zeros(prob.schema), cfg);
    CHECK(g.status == Status::judge_budget);
    CHECK(g.records.empty());
    cfg.kind = OptimizerKind::spsa;
    const auto s = optimize(prob.objective(), ParamVector::zeros(prob.schema), cfg);
    CHECK(s.status == Status::judge_budget);
    CHECK(prob.judge.calls() == 0);

    judge::ScalarComparativeJudge mock([](const Image& img) { return img.px(0, 3); }, 0.0);
    auto o = prob.objective();
    o.comparer = &mock;
    cfg.kind = OptimizerKind::comparative;
    const auto c = optimize(o, ParamVector::zeros(prob.schema), cfg);
    CHECK(c.status == Status::iteration_cap);
    CHECK(c.zero_acceptance);
    CHECK(mock.calls() == 0);
}

TEST_CASE("best-so-far is the running maximum for fuzzed objectives") {
    CounterRng rng(5, "fuzz");
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<double> center(3);
        for (auto& v : center) v = 3.0 * rng.normal();
        RawProblem prob(3, gaussian_bump(center, 2.0 + 5.0 * rng.uniform()));
        OptimizerConfig cfg;
        cfg.max_iters = 40;
        cfg.seed = static_cast<std::uint64_t>(trial);
        for (auto kind : {OptimizerKind::gradient, OptimizerKind::spsa}) {
            cfg.kind = kind;
            check_best_is_running_max(optimize(prob.objective(), ParamVector::zeros(prob.schema), cfg));
        }
        judge::ScalarComparativeJudge mock(
            [&](const Image& img) {
                std::vector<double> u(3), du(3);
                for (std::size_t i = 0; i < 3; ++i) u[i] = params::logit(img.px(i, 3));
                return gaussian_bump(center)(u, du);
            },
            0.0);
        auto o = prob.objective();
        o.comparer = &mock;
        cfg.kind = OptimizerKind::comparative;
        const auto t = optimize(o, ParamVector::zeros(prob.schema), cfg);
        check_best_is_running_max(t);
    }
}

TEST_CASE("judge-call totals match the transport's request count") {
    auto schema = testing::unit_schema(2);
    testing::ProbeVisualizer vis(schema);
    auto transport = std::make_shared<remote::MockTransport>([](const remote::Request& r, std::size_t i) {
        if (r.images.size() == 2) return std::string(i % 3 == 0 ? "FIRST" : "SECOND");
        return "score " + std::to_string(0.1 + 0.8 * static_cast<double>(i % 7) / 7.0);
    });
    remote::RemoteJudgeConfig rc;
    rc.max_concurrency = 1;
    remote::RemoteScoringJudge scorer(transport, rc);
    remote::RemoteComparativeJudge comparer(transport, rc);
    Objective o;
    o.visualizer = &vis;
    o.scorer = &scorer;
    o.comparer = &comparer;

    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::spsa;
    cfg.max_iters = 12;
    const auto s = optimize(o, ParamVector::zeros(schema), cfg);
    CHECK(s.judge_calls == transport->requests());
    CHECK(s.judge_calls == 25);

    const auto before = transport->requests();
    cfg.kind = OptimizerKind::comparative;
    cfg.max_iters = 1000;
    cfg.judge_budget = 21;
    const auto c = optimize(o, ParamVector::zeros(schema), cfg);
    CHECK(c.judge_calls == transport->requests() - before);
    CHECK(c.judge_calls == 20);
    CHECK(c.records.size() == 10);
    CHECK(!c.initial_score);
    for (const auto& r : c.records) CHECK(!r.score);
}

TEST_CASE("a failing remote judge leaves a partial trace") {
    auto schema = testing::unit_schema(1);
    testing::ProbeVisualizer vis(schema);
    auto transport = std::make_shared<remote::MockTransport>([](const remote::Request&, std::size_t i) -> std::string {
        if (i >= 7) throw TransportError("connection reset");
        return "0.5";
    });
    remote::RemoteJudgeConfig rc;
    rc.max_retries = 0;
    remote::RemoteScoringJudge scorer(transport, rc);
    Objective o;
    o.visualizer = &vis;
    o.scorer = &scorer;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::spsa;
    cfg.max_iters = 50;
    const auto t = optimize(o, ParamVector::zeros(schema), cfg);
    CHECK(t.status == Status::error);
    CHECK(t.error_code == ExitCode::transport);
    CHECK(t.records.size() == 4);
    CHECK(t.records.back().note.find("connection reset") != std::string::npos);
}

TEST_CASE("trace serialization") {
    RawProblem prob(2, gaussian_bump({0.5, 0.5}));
    OptimizerConfig cfg;
    cfg.max_iters = 5;
    const auto t = optimize_gradient(prob.objective(), ParamVector::zeros(prob.schema), cfg);
    const auto lines = trace_jsonl(t);
    std::istringstream in(lines);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("iteration") == n);
        CHECK_FALSE(j.contains("wall_ms"));
        CHECK(j.at("raw").size() == 2);
        ++n;
    }
    CHECK(n == t.records.size());
    CHECK(nlohmann::json::parse(timing_jsonl(t).substr(0, timing_jsonl(t).find('\n'))).contains("wall_ms"));
}

TEST_CASE("consistency statistics") {
    const auto r = summarize_scores({0.8, 0.6});
    CHECK(r.consistency == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.mean == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(r.stddev == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
    CHECK(r.min == 0.6);
    CHECK(r.max == 0.8);
}

TEST_CASE("bootstrap consistency of a rendered chart") {
    raster::ChartSpec chart;
    chart.width = chart.height = 48;
    chart.x.attributes = {"x"};
    chart.y.attributes = {"y"};
    auto schema = std::make_shared<const params::ParamSchema>(
        std::vector<params::ParamSpec>{params::ParamSpec::scalar("radius", 1.0, 8.0)});
    chart.size = raster::Operand::of("radius");
    auto one_row = data::Dataset::from_columns(
        {{"x", data::AttributeKind::quantitative, {0.3}, {}}, {"y", data::AttributeKind::quantitative, {0.7}, {}}});
    raster::ChartRenderer single(one_row, chart, schema);
    auto judge = judge::make_overplot_judge();
    Objective o;
    o.visualizer = &single;
    o.scorer = judge.get();
    o.dataset = &single.dataset();
    const auto p = ParamVector::zeros(schema);
    const auto r1 = evaluate_consistency(o, p, 5, 1);
    CHECK(r1.consistency == 1.0);
    CHECK(r1.stddev <= 1e-12);
    CHECK(r1.scores.size() == 5);
    CHECK_THROWS_AS(evaluate_consistency(o, p, 1, 1), ValidationError);

    data::SyntheticOptions gen;
    gen.rows = 300;
    raster::ChartRenderer blobs(data::generate(gen), chart, schema);
    o.visualizer = &blobs;
    o.dataset = &blobs.dataset();
    const auto a = evaluate_consistency(o, p, 6, 9);
    const auto b = evaluate_consistency(o, p, 6, 9);
    CHECK(consistency_json(a) == consistency_json(b));
    CHECK(a.complete);
    CHECK(a.consistency <= 1.0);
    CHECK(a.consistency == doctest::Approx(1.0 - (a.max - a.min)));
}
