#include "vizgrad/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>

namespace vizgrad::commands {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path prepare_output(const config::RunConfig& cfg) {
    const fs::path dir(cfg.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + cfg.output + "': " + ec.message());
    write_file((dir / "config.json").string(), config::resolved_json(cfg));
    return dir;
}

std::shared_ptr<remote::Transport> make_transport(const config::JudgeConfig& jc) {
    auto live = [&]() -> std::unique_ptr<remote::Transport> {
        auto http = remote::http_config_from_env();
        if (!jc.url.empty()) http.url = jc.url;
        return std::make_unique<remote::HttpTransport>(http);
    };
    switch (jc.mode) {
    case config::TranscriptMode::live: return live();
    case config::TranscriptMode::record: return std::make_shared<remote::RecordingTransport>(live(), jc.transcript);
    case config::TranscriptMode::replay: return std::make_shared<remote::ReplayTransport>(jc.transcript);
    }
    return nullptr;
}

std::shared_ptr<judge::ScoringJudge> analytic_judge(const config::JudgeConfig& jc) {
    switch (jc.kind) {
    case config::JudgeKind::overplot: return judge::make_overplot_judge(jc.overplot);
    case config::JudgeKind::ink: return judge::make_ink_judge(jc.ink_target);
    case config::JudgeKind::contrast: return judge::make_contrast_judge(jc.contrast);
    case config::JudgeKind::remote: break;
    }
    return nullptr;
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace

data::Dataset load_dataset(const config::DatasetSource& source) {
    if (source.generate) return data::generate(*source.generate);
    return data::load_csv(source.path, source.csv);
}

Session build_session(const config::RunConfig& cfg, const Overrides& overrides) {
    config::validate(cfg);
    Session s;
    s.dataset = load_dataset(cfg.dataset);
    s.schema = std::make_shared<const params::ParamSchema>(cfg.params);
    s.renderer = std::make_unique<raster::ChartRenderer>(s.dataset, cfg.layout, s.schema,
                                                         raster::RenderOptions{config::render_threads(cfg)});
    s.initial = params::ParamVector::zeros(s.schema);
    if (!cfg.initial.empty()) s.initial.raw = cfg.initial;

    if (overrides.scorer) {
        s.scorer = overrides.scorer;
    } else if (cfg.judge.kind == config::JudgeKind::remote) {
        s.transport = overrides.transport ? overrides.transport : make_transport(cfg.judge);
        s.scorer = std::make_shared<remote::RemoteScoringJudge>(s.transport, cfg.judge.remote);
    } else {
        s.scorer = analytic_judge(cfg.judge);
    }
    if (cfg.judge.kind == config::JudgeKind::remote && !overrides.scorer) {
        s.comparer = std::make_shared<remote::RemoteComparativeJudge>(s.transport, cfg.judge.remote);
    } else {
        // Analytic judges compare through their scores; the scorer itself
        // stays separate so its call count is not inflated.
        auto scorer = cfg.judge.kind == config::JudgeKind::remote ? s.scorer : analytic_judge(cfg.judge);
        if (overrides.scorer) scorer = overrides.scorer;
        const judge::Goal goal = cfg.goal;
        s.comparer = std::make_shared<judge::ScalarComparativeJudge>(
            [scorer, goal](const Image& img) { return scorer->judge(img, goal).score; }, cfg.judge.tie_eps);
    }
    return s;
}

// ---------------------------------------------------------------- gradcheck

GradcheckReport gradcheck(const Visualizer& vis, judge::ScoringJudge& scorer, const judge::Goal& goal,
                          const params::ParamVector& p, const GradcheckOptions& options) {
    if (p.raw.empty()) throw ValidationError("nothing to check: the parameter schema is empty");
    if (!scorer.differentiable()) throw ValidationError("gradcheck needs a differentiable judge");
    if (!(options.h > 0.0)) throw ValidationError("gradcheck step must be positive");
    const auto started = std::chrono::steady_clock::now();

    params::ConstrainOptions opts;
    opts.noise = params::gumbel_noise(*p.schema, options.seed, 0);
    auto objective = [&](const params::ParamVector& q) {
        const auto r = params::constrain(q, opts);
        const auto img = vis.render(r);
        auto j = scorer.judge(img, goal);
        j.check(img);
        return j.score - vis.penalty(r);
    };

    GradcheckReport rep;
    {
        const auto r = params::constrain(p, opts);
        const auto img = vis.render(r);
        auto j = scorer.judge(img, goal);
        j.check(img);
        if (!j.pixel_gradient) throw ValidationError("judge returned no pixel gradient");
        rep.analytic = vis.render_vjp(p, *j.pixel_gradient, opts);
        const auto pen = vis.penalty_vjp(p, opts);
        for (std::size_t i = 0; i < rep.analytic.size(); ++i) rep.analytic[i] -= pen[i];
    }
    const std::size_t n = p.raw.size();
    rep.numeric.resize(n);
    rep.relative_error.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto plus = p, minus = p;
        plus.raw[i] += options.h;
        minus.raw[i] -= options.h;
        rep.numeric[i] = (objective(plus) - objective(minus)) / (2.0 * options.h);
        rep.relative_error[i] = relative_error(rep.analytic[i], rep.numeric[i], options.floor);
    }
    auto sorted = rep.relative_error;
    std::sort(sorted.begin(), sorted.end());
    rep.max_error = sorted.back();
    // Nearest-rank 95th percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    rep.p95_error = sorted[std::max<std::size_t>(rank, 1) - 1];
    rep.passed = rep.p95_error <= options.p95_tolerance && rep.max_error <= options.max_tolerance;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rep;
}

std::string gradcheck_json(const GradcheckReport& r) {
    json j;
    j["passed"] = r.passed;
    j["max_relative_error"] = r.max_error;
    j["p95_relative_error"] = r.p95_error;
    j["coordinates"] = json::array();
    for (std::size_t i = 0; i < r.analytic.size(); ++i) {
        j["coordinates"].push_back({{"index", i},
                                    {"analytic", r.analytic[i]},
                                    {"numeric", r.numeric[i]},
                                    {"relative_error", r.relative_error[i]}});
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- reports

std::string realized_json(const params::RealizedParams& r) {
    json j = json::object();
    const auto& schema = r.schema();
    for (std::size_t s = 0; s < schema.size(); ++s) {
        const auto& spec = schema.specs()[s];
        const auto v = r.get(spec.name);
        if (spec.kind == params::ParamKind::categorical) {
            const auto best = std::max_element(v.begin(), v.end()) - v.begin();
            j[spec.name] = {{"weights", std::vector<double>(v.begin(), v.end())},
                            {"choice", r.choice(s).value_or(static_cast<std::size_t>(best))}};
        } else if (spec.kind == params::ParamKind::bounded_scalar) {
            j[spec.name] = v[0];
        } else {
            j[spec.name] = std::vector<double>(v.begin(), v.end());
        }
    }
    return j.dump();
}

std::string summary_json(const optim::Trace& t, const params::SchemaPtr& schema, const optim::OptimizerConfig& cfg) {
    json j;
    j["optimizer"] = std::string(optim::to_string(cfg.kind));
    j["seed"] = cfg.seed;
    j["status"] = std::string(optim::to_string(t.status));
    if (!t.message.empty()) j["message"] = t.message;
    j["iterations"] = t.records.size();
    j["judge_calls"] = t.judge_calls;
    j["initial_score"] = t.initial_score ? json(*t.initial_score) : json(nullptr);
    j["best_score"] = t.best_score ? json(*t.best_score) : json(nullptr);
    j["initial_raw"] = t.initial_raw;
    j["best_raw"] = t.best_raw;
    j["final_raw"] = t.final_raw;
    j["best_realized"] = json::parse(realized_json(optim::committed(params::ParamVector{schema, t.best_raw})));
    if (cfg.kind == optim::OptimizerKind::comparative) {
        j["acceptances"] = t.acceptances;
        j["zero_acceptance"] = t.zero_acceptance;
    }
    if (cfg.kind == optim::OptimizerKind::spsa) j["stall_warning"] = t.stall_warning;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- subcommands

ExitCode run_render(const config::RunConfig& cfg, const Overrides& overrides) {
    const auto s = build_session(cfg, overrides);
    const auto dir = prepare_output(cfg);
    const auto img = s.renderer->render(optim::committed(s.initial));
    write_png(img, (dir / "chart.png").string());
    write_vgimg(img, (dir / "chart.vgimg").string());
    return ExitCode::ok;
}

ExitCode run_optimize(const config::RunConfig& cfg, const Overrides& overrides) {
    const auto s = build_session(cfg, overrides);
    const auto dir = prepare_output(cfg);
    optim::Objective obj;
    obj.visualizer = s.renderer.get();
    obj.scorer = s.scorer.get();
    obj.comparer = s.comparer.get();
    obj.goal = cfg.goal;
    obj.dataset = &s.dataset;
    auto ocfg = cfg.optimizer;
    ocfg.seed = cfg.seed;
    const auto trace = optim::optimize(obj, s.initial, ocfg);

    write_file((dir / "trace.jsonl").string(), optim::trace_jsonl(trace));
    write_file((dir / "timing.jsonl").string(), optim::timing_jsonl(trace));
    write_file((dir / "summary.json").string(), summary_json(trace, s.schema, ocfg));
    write_png(s.renderer->render(optim::committed(s.initial)), (dir / "initial.png").string());
    write_png(s.renderer->render(optim::committed(params::ParamVector{s.schema, trace.best_raw})),
              (dir / "best.png").string());
    if (trace.status == optim::Status::error) return trace.error_code;
    return ExitCode::ok;
}

ExitCode run_judge(const config::RunConfig& cfg, const Overrides& overrides) {
    const auto s = build_session(cfg, overrides);
    const auto dir = prepare_output(cfg);
    const auto r = optim::committed(s.initial);
    const auto img = s.renderer->render(r);
    auto j = s.scorer->judge(img, cfg.goal);
    j.check(img);
    json out;
    out["score"] = j.score;
    out["penalty"] = s.renderer->penalty(r);
    out["differentiable"] = s.scorer->differentiable();
    out["rationale"] = j.rationale;
    out["realized"] = json::parse(realized_json(r));
    write_file((dir / "judgment.json").string(), out.dump(2) + "\n");
    return ExitCode::ok;
}

ExitCode run_compare(const config::RunConfig& cfg, const std::vector<double>& other_raw, const Overrides& overrides) {
    const auto s = build_session(cfg, overrides);
    if (other_raw.size() != s.schema->raw_dim()) {
        throw ValidationError("comparison point has length " + std::to_string(other_raw.size()) + ", schema needs " +
                              std::to_string(s.schema->raw_dim()));
    }
    const auto dir = prepare_output(cfg);
    const auto first = s.renderer->render(optim::committed(s.initial));
    const auto second = s.renderer->render(optim::committed(params::ParamVector{s.schema, other_raw}));
    const auto pref = s.comparer->compare(first, second, cfg.goal);
    json out;
    out["choice"] = std::string(judge::to_string(pref.choice));
    out["confidence"] = pref.confidence ? json(*pref.confidence) : json(nullptr);
    out["rationale"] = pref.rationale;
    out["judge_calls"] = s.comparer->calls();
    write_file((dir / "comparison.json").string(), out.dump(2) + "\n");
    return ExitCode::ok;
}

ExitCode run_gradcheck(const config::RunConfig& cfg, const Overrides& overrides) {
    const auto s = build_session(cfg, overrides);
    const auto dir = prepare_output(cfg);
    GradcheckOptions o;
    o.h = cfg.gradcheck.h;
    o.p95_tolerance = cfg.gradcheck.p95_tolerance;
    o.max_tolerance = cfg.gradcheck.max_tolerance;
    o.floor = cfg.gradcheck.floor;
    o.seed = cfg.seed;
    const auto rep = gradcheck(*s.renderer, *s.scorer, cfg.goal, s.initial, o);
    write_file((dir / "gradcheck.json").string(), gradcheck_json(rep));
    return rep.passed ? ExitCode::ok : ExitCode::gradcheck_failed;
}

ExitCode run_consistency(const config::RunConfig& cfg, const Overrides& overrides) {
    if (cfg.replicates < 2) throw ValidationError("consistency needs at least 2 replicates");
    const auto s = build_session(cfg, overrides);
    const auto dir = prepare_output(cfg);
    optim::Objective obj;
    obj.visualizer = s.renderer.get();
    obj.scorer = s.scorer.get();
    obj.goal = cfg.goal;
    obj.dataset = &s.dataset;
    const auto rep = optim::evaluate_consistency(obj, s.initial, cfg.replicates, cfg.seed);
    write_file((dir / "consistency.json").string(), optim::consistency_json(rep) + "\n");
    return rep.complete ? ExitCode::ok : rep.error_code;
}

void run_gen_data(const data::SyntheticOptions& options, const std::string& path) {
    data::save_csv(data::generate(options), path);
}

}  // namespace vizgrad::commands
