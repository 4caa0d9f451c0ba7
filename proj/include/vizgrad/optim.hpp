#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vizgrad/data.hpp"
#include "vizgrad/error.hpp"
#include "vizgrad/judge.hpp"
#include "vizgrad/params.hpp"
#include "vizgrad/visualizer.hpp"

namespace vizgrad::optim {

enum class OptimizerKind { gradient, spsa, comparative };
enum class Status { converged, iteration_cap, judge_budget, error };
// How Gumbel noise is supplied to the relaxed categorical parameters.
enum class NoiseMode { fresh, fixed, none };

std::string_view to_string(OptimizerKind k) noexcept;
std::string_view to_string(Status s) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view text);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::gradient;
    std::size_t max_iters = 300;
    std::size_t judge_budget = 1'000'000;
    double step = 0.05;

    // gradient: adaptive-moment ascent
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    NoiseMode noise = NoiseMode::fresh;
    bool anneal = false;  // temperature *= anneal_rate per iteration, floored
    double anneal_rate = 0.95;
    double temperature_floor = 0.05;
    bool straight_through = false;

    // spsa
    double perturbation = 0.1;
    double step_decay = 0.602;         // alpha
    double perturbation_decay = 0.101;  // gamma
    std::size_t stall_iterations = 10;

    // comparative
    double sigma = 1.0;
    double grow = 1.5;
    double shrink = 0.8;
    double tie_shrink = 0.95;
    double sigma_floor = 1e-4;

    // stop when the best score improves by less than `tolerance` over
    // `window` iterations
    std::size_t window = 20;
    double tolerance = 1e-4;

    std::uint64_t seed = 0;

    void check() const;
};

// Everything an optimizer evaluates: the visualization, the judge, the goal.
struct Objective {
    const Visualizer* visualizer = nullptr;
    judge::ScoringJudge* scorer = nullptr;
    judge::ComparativeJudge* comparer = nullptr;
    judge::Goal goal{"maximize the judge score", judge::GoalKind::pattern, {}};
    const data::Dataset* dataset = nullptr;  // for bootstrap consistency
};

struct Record {
    std::size_t iteration = 0;
    std::vector<double> raw;       // point the record describes
    std::vector<double> realized;  // constrain(raw), hardened for zeroth-order runs
    std::optional<double> score;   // objective value (judge score - penalty)
    std::size_t judge_calls = 0;   // cumulative
    double wall_ms = 0.0;          // not serialized into the trace
    std::optional<judge::Choice> preference;
    std::optional<bool> accepted;
    std::optional<double> step;  // comparative sigma / spsa perturbation
    std::string note;
};

struct Trace {
    std::vector<Record> records;
    std::vector<double> initial_raw;
    std::vector<double> final_raw;
    std::vector<double> best_raw;
    std::optional<double> initial_score;
    std::optional<double> best_score;
    Status status = Status::iteration_cap;
    std::string message;
    ExitCode error_code = ExitCode::ok;
    std::size_t judge_calls = 0;
    std::size_t acceptances = 0;
    bool zero_acceptance = false;
    bool stall_warning = false;
};

Trace optimize_gradient(const Objective& obj, const params::ParamVector& p0, const OptimizerConfig& cfg);
Trace optimize_spsa(const Objective& obj, const params::ParamVector& p0, const OptimizerConfig& cfg);
Trace optimize_comparative(const Objective& obj, const params::ParamVector& p0, const OptimizerConfig& cfg);
// Dispatch on cfg.kind.
Trace optimize(const Objective& obj, const params::ParamVector& p0, const OptimizerConfig& cfg);

struct ConsistencyReport {
    std::vector<double> scores;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    double min = 0.0;
    double max = 0.0;
    double consistency = 0.0;  // 1 - (max - min)
    bool complete = true;
    std::string message;
    ExitCode error_code = ExitCode::ok;
};

// Summary statistics of a score list (used by evaluate_consistency).
ConsistencyReport summarize_scores(std::vector<double> scores);

// Renders the hardened point over B bootstrap replicates of the dataset
// and judges each one.
ConsistencyReport evaluate_consistency(const Objective& obj, const params::ParamVector& p, std::size_t replicates,
                                       std::uint64_t seed);

// Point that zeroth-order runs and final reports render: soft constrain with
// zero noise, then hardened.
params::RealizedParams committed(const params::ParamVector& p);

// JSON-lines, one record per line, without wall-clock fields.
std::string trace_jsonl(const Trace& t);
// JSON-lines of {iteration, wall_ms}.
std::string timing_jsonl(const Trace& t);
std::string consistency_json(const ConsistencyReport& r);

}  // namespace vizgrad::optim
