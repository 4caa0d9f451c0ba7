#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vizgrad/config.hpp"
#include "vizgrad/error.hpp"

namespace vizgrad::commands {

// Test seams: replace the transport or the scoring judge the config would
// otherwise build.
struct Overrides {
    std::shared_ptr<remote::Transport> transport;
    std::shared_ptr<judge::ScoringJudge> scorer;
};

// Everything built from a RunConfig.
struct Session {
    data::Dataset dataset;
    params::SchemaPtr schema;
    std::unique_ptr<raster::ChartRenderer> renderer;
    params::ParamVector initial;
    std::shared_ptr<remote::Transport> transport;  // remote judges only
    std::shared_ptr<judge::ScoringJudge> scorer;
    std::shared_ptr<judge::ComparativeJudge> comparer;
};

data::Dataset load_dataset(const config::DatasetSource& source);
Session build_session(const config::RunConfig& cfg, const Overrides& overrides = {});

struct GradcheckOptions {
    double h = 1e-3;
    double p95_tolerance = 1e-3;
    double max_tolerance = 1e-2;
    double floor = 1e-8;
    std::uint64_t seed = 0;  // fixed Gumbel draw used on both sides
};

struct GradcheckReport {
    std::vector<double> analytic;
    std::vector<double> numeric;
    std::vector<double> relative_error;
    double max_error = 0.0;
    double p95_error = 0.0;
    bool passed = false;
    double seconds = 0.0;
};

// Central differences of score(render(constrain(u))) - penalty against the
// reverse pass, at u = p, in soft mode with one fixed noise draw.
GradcheckReport gradcheck(const Visualizer& vis, judge::ScoringJudge& scorer, const judge::Goal& goal,
                          const params::ParamVector& p, const GradcheckOptions& options);
std::string gradcheck_json(const GradcheckReport& r);

// Subcommands. Each writes its artifacts plus config.json (the resolved
// config) into cfg.output and returns the process exit code.
ExitCode run_render(const config::RunConfig& cfg, const Overrides& overrides = {});
ExitCode run_optimize(const config::RunConfig& cfg, const Overrides& overrides = {});
ExitCode run_judge(const config::RunConfig& cfg, const Overrides& overrides = {});
// Compares the config's initial point (FIRST) against `other_raw` (SECOND).
ExitCode run_compare(const config::RunConfig& cfg, const std::vector<double>& other_raw,
                     const Overrides& overrides = {});
ExitCode run_gradcheck(const config::RunConfig& cfg, const Overrides& overrides = {});
ExitCode run_consistency(const config::RunConfig& cfg, const Overrides& overrides = {});
void run_gen_data(const data::SyntheticOptions& options, const std::string& path);

// Summary of an optimizer run as written to summary.json.
std::string summary_json(const optim::Trace& trace, const params::SchemaPtr& schema,
                         const optim::OptimizerConfig& cfg);

// Realized values keyed by parameter name.
std::string realized_json(const params::RealizedParams& r);

}  // namespace vizgrad::commands
