// vizgrad: optimize visualization parameters against a judge.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "vizgrad/commands.hpp"

using namespace vizgrad;
using json = nlohmann::json;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string transcript;
    bool record = false;
    bool replay = false;
    std::string output;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_option("--threads", c.threads, "render threads; 1 is fully deterministic");
    cmd->add_option("--transcript", c.transcript, "judge transcript (JSON lines)");
    auto* rec = cmd->add_flag("--record", c.record, "record remote judge replies into --transcript");
    auto* rep = cmd->add_flag("--replay", c.replay, "answer judge requests from --transcript");
    rec->excludes(rep);
    cmd->add_option("--output", c.output, "output directory (overrides config)");
}

config::RunConfig resolve(const Common& c) {
    auto cfg = config::load(c.config_path);
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.optimizer.seed = *c.seed;
    }
    if (c.threads) {
        cfg.threads = *c.threads;
        cfg.deterministic = *c.threads == 1;
    }
    if (!c.transcript.empty()) cfg.judge.transcript = std::filesystem::absolute(c.transcript).string();
    if (c.record) cfg.judge.mode = config::TranscriptMode::record;
    if (c.replay) cfg.judge.mode = config::TranscriptMode::replay;
    if (!c.output.empty()) cfg.output = std::filesystem::absolute(c.output).string();
    return cfg;
}

std::vector<double> read_point(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        const auto j = json::parse(in);
        if (j.is_array()) return j.get<std::vector<double>>();
        if (j.contains("best_raw")) return j.at("best_raw").get<std::vector<double>>();
    } catch (const json::exception&) {
    }
    throw ValidationError(path + ": expected a raw vector or a summary with best_raw");
}

void report(const std::exception& e, ExitCode code) {
    std::cerr << json{{"error", e.what()}, {"exit_code", static_cast<int>(code)}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vizgrad: optimize visualization parameters against a judge"};
    app.require_subcommand(1);

    Common common;
    auto* render = app.add_subcommand("render", "render the initial point to chart.png and chart.vgimg");
    auto* optimize = app.add_subcommand("optimize", "run the configured optimizer");
    auto* judge = app.add_subcommand("judge", "score the initial point");
    auto* compare = app.add_subcommand("compare", "compare the initial point against another point");
    auto* gradcheck = app.add_subcommand("gradcheck", "check the composite gradient against finite differences");
    auto* consistency = app.add_subcommand("consistency", "score the initial point over bootstrap replicates");
    for (auto* cmd : {render, optimize, judge, compare, gradcheck, consistency}) add_common(cmd, common);

    std::string against;
    compare->add_option("--against", against, "JSON raw vector, or a summary.json (uses best_raw)")
        ->required()
        ->check(CLI::ExistingFile);
    std::optional<std::size_t> replicates;
    consistency->add_option("--replicates,-B", replicates, "bootstrap replicates (>= 2)");

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
    data::SyntheticOptions synth;
    std::string kind = "gaussian_blobs";
    std::string out_path;
    gen->add_option("--kind", kind, "gaussian_blobs | correlated | uniform")
        ->check(CLI::IsMember({"gaussian_blobs", "correlated", "uniform"}));
    gen->add_option("--rows", synth.rows, "row count");
    gen->add_option("--clusters", synth.clusters, "blob count");
    gen->add_option("--spread", synth.spread, "blob standard deviation");
    gen->add_option("--correlation", synth.correlation, "correlation of the correlated pair");
    gen->add_option("--seed", synth.seed, "generator seed");
    gen->add_option("--out", out_path, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::validation);
    }

    try {
        ExitCode rc = ExitCode::ok;
        if (gen->parsed()) {
            synth.kind = kind == "correlated" ? data::SyntheticKind::correlated
                         : kind == "uniform"  ? data::SyntheticKind::uniform
                                              : data::SyntheticKind::gaussian_blobs;
            commands::run_gen_data(synth, out_path);
        } else {
            auto cfg = resolve(common);
            if (render->parsed()) rc = commands::run_render(cfg);
            if (optimize->parsed()) rc = commands::run_optimize(cfg);
            if (judge->parsed()) rc = commands::run_judge(cfg);
            if (compare->parsed()) rc = commands::run_compare(cfg, read_point(against));
            if (gradcheck->parsed()) rc = commands::run_gradcheck(cfg);
            if (consistency->parsed()) {
                if (replicates) cfg.replicates = *replicates;
                rc = commands::run_consistency(cfg);
            }
            if (rc != ExitCode::ok) {
                std::cerr << json{{"error", "command finished with status " + std::to_string(static_cast<int>(rc))},
                                  {"exit_code", static_cast<int>(rc)}}
                                 .dump()
                          << '\n';
            }
        }
        return static_cast<int>(rc);
    } catch (const Error& e) {
        report(e, e.code());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        report(e, ExitCode::validation);
        return static_cast<int>(ExitCode::validation);
    }
}
