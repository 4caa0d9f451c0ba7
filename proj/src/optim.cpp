#include "vizgrad/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "vizgrad/rng.hpp"

namespace vizgrad::optim {

using json = nlohmann::json;
using params::ConstrainOptions;
using params::Mode;
using params::ParamVector;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// Best-so-far bookkeeping and windowed stall detection.
class Progress {
public:
    Progress(Trace& trace, std::size_t window, double tolerance)
        : trace_(trace), window_(window), tolerance_(tolerance) {}

    void offer(const std::vector<double>& raw, double score) {
        if (!trace_.best_score || score > *trace_.best_score) {
            trace_.best_score = score;
            trace_.best_raw = raw;
        }
    }

    // Called once per iteration after offers; true when converged.
    bool step() {
        history_.push_back(trace_.best_score.value_or(-INFINITY));
        if (history_.size() <= window_) return false;
        const double now = history_.back();
        const double then = history_[history_.size() - 1 - window_];
        if (!std::isfinite(then)) return false;
        return now - then < tolerance_;
    }

private:
    Trace& trace_;
    std::size_t window_;
    double tolerance_;
    std::vector<double> history_;
};

void check_objective(const Objective& obj, const ParamVector& p0) {
    if (!obj.visualizer) throw ValidationError("objective has no visualizer");
    if (!p0.schema || p0.raw.size() != obj.visualizer->schema()->raw_dim()) {
        throw ValidationError("initial point does not match the visualizer's schema");
    }
    obj.goal.check();
}

// Evaluates judge score minus penalty at a committed (hardened) point.
struct ScalarProbe {
    const Objective& obj;

    double operator()(const ParamVector& p, std::vector<double>* realized_out = nullptr) const {
        const auto r = committed(p);
        if (realized_out) *realized_out = to_vector(r.values());
        const auto img = obj.visualizer->render(r);
        auto j = obj.scorer->judge(img, obj.goal);
        j.check(img);
        return j.score - obj.visualizer->penalty(r);
    }
};

void fail(Trace& t, const Error& e) {
    t.status = Status::error;
    t.message = e.what();
    t.error_code = e.code();
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(OptimizerKind k) noexcept {
    switch (k) {
    case OptimizerKind::gradient: return "gradient";
    case OptimizerKind::spsa: return "spsa";
    case OptimizerKind::comparative: return "comparative";
    }
    return "?";
}

std::string_view to_string(Status s) noexcept {
    switch (s) {
    case Status::converged: return "converged";
    case Status::iteration_cap: return "iteration_cap";
    case Status::judge_budget: return "judge_budget";
    case Status::error: return "error";
    }
    return "?";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
    for (auto k : {OptimizerKind::gradient, OptimizerKind::spsa, OptimizerKind::comparative}) {
        if (to_string(k) == text) return k;
    }
    throw ValidationError("unknown optimizer '" + std::string(text) + "'");
}

void OptimizerConfig::check() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("optimizer ") + name + " must be positive");
    };
    positive(step, "step");
    positive(epsilon, "epsilon");
    positive(perturbation, "perturbation");
    positive(sigma, "sigma");
    positive(sigma_floor, "sigma_floor");
    positive(anneal_rate, "anneal_rate");
    positive(temperature_floor, "temperature_floor");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("optimizer moment decays must lie in [0,1)");
    }
    if (window < 2) throw ValidationError("optimizer window must be >= 2");
    if (tolerance < 0.0) throw ValidationError("optimizer tolerance must be >= 0");
    if (!(grow > 1.0) || !(shrink > 0.0 && shrink < 1.0) || !(tie_shrink > 0.0 && tie_shrink <= 1.0)) {
        throw ValidationError("comparative step factors must satisfy grow > 1, 0 < shrink < 1, 0 < tie_shrink <= 1");
    }
}

params::RealizedParams committed(const ParamVector& p) {
    return params::harden(params::constrain(p, ConstrainOptions{}));
}

// ---------------------------------------------------------------- gradient

Trace optimize_gradient(const Objective& obj, const ParamVector& p0, const OptimizerConfig& cfg) {
    check_objective(obj, p0);
    cfg.check();
    if (!obj.scorer || !obj.scorer->differentiable()) {
        throw ValidationError("gradient optimizer needs a differentiable judge");
    }
    Trace trace;
    trace.initial_raw = p0.raw;
    trace.best_raw = p0.raw;
    Progress progress(trace, cfg.window, cfg.tolerance);

    ParamVector p = p0;
    const auto& schema = *p.schema;
    const std::size_t n = p.raw.size();
    std::vector<double> m(n, 0.0), v(n, 0.0);
    const std::vector<double> fixed_noise =
        cfg.noise == NoiseMode::fixed ? params::gumbel_noise(schema, cfg.seed, 0) : std::vector<double>{};
    const auto started = Clock::now();

    trace.status = Status::iteration_cap;
    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        if (trace.judge_calls + 1 > cfg.judge_budget) {
            trace.status = Status::judge_budget;
            break;
        }
        ConstrainOptions opts;
        opts.mode = cfg.straight_through ? Mode::hard : Mode::soft;
        opts.straight_through = cfg.straight_through;
        if (cfg.noise == NoiseMode::fresh) opts.noise = params::gumbel_noise(schema, cfg.seed, k);
        if (cfg.noise == NoiseMode::fixed) opts.noise = fixed_noise;
        if (cfg.anneal) {
            opts.temperature_scale = std::pow(cfg.anneal_rate, static_cast<double>(k));
            opts.temperature_floor = cfg.temperature_floor;
        }

        Record rec;
        rec.iteration = k;
        rec.raw = p.raw;
        std::vector<double> grad;
        try {
            const auto r = params::constrain(p, opts);
            rec.realized = to_vector(r.values());
            const auto img = obj.visualizer->render(r);
            auto j = obj.scorer->judge(img, obj.goal);
            ++trace.judge_calls;
            j.check(img);
            if (!j.pixel_gradient) throw ValidationError("judge returned no pixel gradient");
            const double score = j.score - obj.visualizer->penalty(r);
            rec.score = score;
            if (k == 0) trace.initial_score = score;
            grad = obj.visualizer->render_vjp(p, *j.pixel_gradient, opts);
            const auto pen = obj.visualizer->penalty_vjp(p, opts);
            for (std::size_t i = 0; i < n; ++i) grad[i] -= pen[i];
            if (!all_finite(grad) || !std::isfinite(score)) {
                throw NumericError("non-finite gradient at iteration " + std::to_string(k));
            }
        } catch (const Error& e) {
            rec.judge_calls = trace.judge_calls;
            rec.wall_ms = elapsed_ms(started);
            rec.note = e.what();
            trace.records.push_back(std::move(rec));
            fail(trace, e);
            break;
        }
        rec.judge_calls = trace.judge_calls;
        rec.wall_ms = elapsed_ms(started);
        progress.offer(rec.raw, *rec.score);
        trace.records.push_back(std::move(rec));

        const double t = static_cast<double>(k + 1);
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            p.raw[i] += cfg.step * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
        }
        if (progress.step()) {
            trace.status = Status::converged;
            break;
        }
    }
    trace.final_raw = p.raw;
    return trace;
}

// ---------------------------------------------------------------- spsa

Trace optimize_spsa(const Objective& obj, const ParamVector& p0, const OptimizerConfig& cfg) {
    check_objective(obj, p0);
    cfg.check();
    if (!obj.scorer) throw ValidationError("spsa optimizer needs a scoring judge");
    Trace trace;
    trace.initial_raw = p0.raw;
    trace.best_raw = p0.raw;
    Progress progress(trace, cfg.window, cfg.tolerance);
    const ScalarProbe probe{obj};
    CounterRng rng(cfg.seed, "spsa-delta");
    ParamVector p = p0;
    const std::size_t n = p.raw.size();
    const auto started = Clock::now();
    std::size_t flat_run = 0;

    trace.status = Status::iteration_cap;
    try {
        if (cfg.judge_budget < 1) {
            trace.status = Status::judge_budget;
            trace.final_raw = p.raw;
            return trace;
        }
        trace.initial_score = probe(p);
        ++trace.judge_calls;
        progress.offer(p.raw, *trace.initial_score);
    } catch (const Error& e) {
        fail(trace, e);
        trace.final_raw = p.raw;
        return trace;
    }

    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        if (trace.judge_calls + 2 > cfg.judge_budget) {
            trace.status = Status::judge_budget;
            break;
        }
        const double kk = static_cast<double>(k + 1);
        const double delta_k = cfg.perturbation / std::pow(kk, cfg.perturbation_decay);
        const double step_k = cfg.step / std::pow(kk, cfg.step_decay);
        std::vector<double> dir(n);
        for (auto& d : dir) d = rng.rademacher();

        ParamVector plus = p, minus = p;
        for (std::size_t i = 0; i < n; ++i) {
            plus.raw[i] += delta_k * dir[i];
            minus.raw[i] -= delta_k * dir[i];
        }
        Record rec;
        rec.iteration = k;
        rec.step = delta_k;
        double s_plus = 0.0, s_minus = 0.0;
        try {
            std::vector<double> realized_plus, realized_minus;
            s_plus = probe(plus, &realized_plus);
            ++trace.judge_calls;
            s_minus = probe(minus, &realized_minus);
            ++trace.judge_calls;
            const bool plus_wins = s_plus >= s_minus;
            rec.raw = plus_wins ? plus.raw : minus.raw;
            rec.realized = plus_wins ? realized_plus : realized_minus;
            rec.score = std::max(s_plus, s_minus);
        } catch (const Error& e) {
            rec.raw = p.raw;
            rec.judge_calls = trace.judge_calls;
            rec.wall_ms = elapsed_ms(started);
            rec.note = e.what();
            trace.records.push_back(std::move(rec));
            fail(trace, e);
            break;
        }
        flat_run = s_plus == s_minus ? flat_run + 1 : 0;
        if (flat_run >= cfg.stall_iterations && !trace.stall_warning) {
            trace.stall_warning = true;
            rec.note = "stall: probes returned identical scores for " + std::to_string(flat_run) +
                       " iterations; perturbation may be too large";
        }
        rec.judge_calls = trace.judge_calls;
        rec.wall_ms = elapsed_ms(started);
        progress.offer(rec.raw, *rec.score);
        trace.records.push_back(std::move(rec));

        const double scale = (s_plus - s_minus) / (2.0 * delta_k);
        for (std::size_t i = 0; i < n; ++i) p.raw[i] += step_k * scale * dir[i];
        if (progress.step()) {
            trace.status = Status::converged;
            break;
        }
    }
    trace.final_raw = p.raw;
    return trace;
}

// ---------------------------------------------------------------- comparative

Trace optimize_comparative(const Objective& obj, const ParamVector& p0, const OptimizerConfig& cfg) {
    check_objective(obj, p0);
    cfg.check();
    if (!obj.comparer) throw ValidationError("comparative optimizer needs a comparative judge");
    Trace trace;
    trace.initial_raw = p0.raw;
    trace.best_raw = p0.raw;
    Progress progress(trace, cfg.window, cfg.tolerance);
    CounterRng rng(cfg.seed, "comparative-z");
    ParamVector p = p0;
    const std::size_t n = p.raw.size();
    double sigma = cfg.sigma;
    const auto started = Clock::now();
    std::size_t expected_cost = 1;

    auto incumbent = committed(p);
    Image incumbent_img = obj.visualizer->render(incumbent);
    auto score_of = [&](const Image& img, const params::RealizedParams& r) -> std::optional<double> {
        if (auto s = obj.comparer->underlying_score(img)) return *s - obj.visualizer->penalty(r);
        return std::nullopt;
    };
    std::optional<double> incumbent_score = score_of(incumbent_img, incumbent);
    trace.initial_score = incumbent_score;
    if (incumbent_score) progress.offer(p.raw, *incumbent_score);

    trace.status = Status::iteration_cap;
    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        if (trace.judge_calls + expected_cost > cfg.judge_budget) {
            trace.status = Status::judge_budget;
            break;
        }
        ParamVector challenger = p;
        for (std::size_t i = 0; i < n; ++i) challenger.raw[i] += sigma * rng.normal();
        Record rec;
        rec.iteration = k;
        rec.step = sigma;
        try {
            const auto r = committed(challenger);
            const Image img = obj.visualizer->render(r);
            const auto before = obj.comparer->calls();
            // Incumbent is FIRST, challenger SECOND.
            const auto pref = obj.comparer->compare(incumbent_img, img, obj.goal);
            expected_cost = std::max<std::size_t>(1, obj.comparer->calls() - before);
            trace.judge_calls += expected_cost;
            rec.preference = pref.choice;
            rec.accepted = pref.choice == judge::Choice::second;
            if (*rec.accepted) {
                p = challenger;
                incumbent = r;
                incumbent_img = img;
                incumbent_score = score_of(img, r);
                ++trace.acceptances;
                sigma *= cfg.grow;
            } else if (pref.choice == judge::Choice::first) {
                sigma *= cfg.shrink;
            } else {
                sigma *= cfg.tie_shrink;
            }
            sigma = std::max(sigma, cfg.sigma_floor);
            rec.raw = p.raw;
            rec.realized = to_vector(incumbent.values());
            rec.score = incumbent_score;
        } catch (const Error& e) {
            rec.raw = p.raw;
            rec.judge_calls = trace.judge_calls;
            rec.wall_ms = elapsed_ms(started);
            rec.note = e.what();
            trace.records.push_back(std::move(rec));
            fail(trace, e);
            break;
        }
        rec.judge_calls = trace.judge_calls;
        rec.wall_ms = elapsed_ms(started);
        if (rec.score) progress.offer(rec.raw, *rec.score);
        trace.records.push_back(std::move(rec));
        if (incumbent_score && progress.step()) {
            trace.status = Status::converged;
            break;
        }
    }
    if (!incumbent_score) trace.best_raw = p.raw;
    trace.zero_acceptance = trace.acceptances == 0;
    // Running out of comparisons without a single acceptance is reported as
    // an iteration cap, flagged.
    if (trace.zero_acceptance && trace.status == Status::judge_budget) trace.status = Status::iteration_cap;
    trace.final_raw = p.raw;
    return trace;
}

Trace optimize(const Objective& obj, const ParamVector& p0, const OptimizerConfig& cfg) {
    switch (cfg.kind) {
    case OptimizerKind::gradient: return optimize_gradient(obj, p0, cfg);
    case OptimizerKind::spsa: return optimize_spsa(obj, p0, cfg);
    case OptimizerKind::comparative: return optimize_comparative(obj, p0, cfg);
    }
    throw ValidationError("unknown optimizer kind");
}

// ---------------------------------------------------------------- consistency

ConsistencyReport summarize_scores(std::vector<double> scores) {
    ConsistencyReport r;
    r.scores = std::move(scores);
    if (r.scores.empty()) {
        r.complete = false;
        return r;
    }
    const auto n = static_cast<double>(r.scores.size());
    r.mean = std::accumulate(r.scores.begin(), r.scores.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : r.scores) ss += (s - r.mean) * (s - r.mean);
    r.stddev = r.scores.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const auto [lo, hi] = std::minmax_element(r.scores.begin(), r.scores.end());
    r.min = *lo;
    r.max = *hi;
    r.consistency = 1.0 - (r.max - r.min);
    return r;
}

ConsistencyReport evaluate_consistency(const Objective& obj, const ParamVector& p, std::size_t replicates,
                                       std::uint64_t seed) {
    if (replicates < 2) throw ValidationError("consistency needs at least 2 replicates");
    if (!obj.visualizer || !obj.dataset) throw ValidationError("consistency needs a visualizer and a dataset");
    if (!obj.scorer) throw ValidationError("consistency needs a scoring judge");
    const auto r = committed(p);
    std::vector<double> scores;
    try {
        for (std::size_t b = 0; b < replicates; ++b) {
            const std::uint64_t seed_b = CounterRng(seed, "bootstrap-b").substream(b).next_u64();
            const auto sample = data::bootstrap_resample(*obj.dataset, seed_b);
            const auto vis = obj.visualizer->with_dataset(sample);
            if (!vis) throw ValidationError("visualizer cannot be rebound to a resampled dataset");
            const auto img = vis->render(r);
            auto j = obj.scorer->judge(img, obj.goal);
            j.check(img);
            scores.push_back(j.score);
        }
    } catch (const Error& e) {
        auto partial = summarize_scores(std::move(scores));
        partial.complete = false;
        partial.message = e.what();
        partial.error_code = e.code();
        return partial;
    }
    return summarize_scores(std::move(scores));
}

// ---------------------------------------------------------------- serialization

std::string trace_jsonl(const Trace& t) {
    std::string out;
    for (const auto& r : t.records) {
        json j;
        j["iteration"] = r.iteration;
        j["raw"] = r.raw;
        j["realized"] = r.realized;
        j["score"] = r.score ? json(*r.score) : json(nullptr);
        j["judge_calls"] = r.judge_calls;
        if (r.preference) j["preference"] = std::string(judge::to_string(*r.preference));
        if (r.accepted) j["accepted"] = *r.accepted;
        if (r.step) j["step"] = *r.step;
        if (!r.note.empty()) j["note"] = r.note;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string timing_jsonl(const Trace& t) {
    std::string out;
    for (const auto& r : t.records) {
        out += json{{"iteration", r.iteration}, {"wall_ms", r.wall_ms}}.dump();
        out += '\n';
    }
    return out;
}

std::string consistency_json(const ConsistencyReport& r) {
    json j;
    j["scores"] = r.scores;
    j["mean"] = r.mean;
    j["stddev"] = r.stddev;
    j["min"] = r.min;
    j["max"] = r.max;
    j["consistency"] = r.consistency;
    j["complete"] = r.complete;
    if (!r.message.empty()) j["message"] = r.message;
    return j.dump(2);
}

}  // namespace vizgrad::optim
