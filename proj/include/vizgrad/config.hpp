#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vizgrad/data.hpp"
#include "vizgrad/judge.hpp"
#include "vizgrad/optim.hpp"
#include "vizgrad/params.hpp"
#include "vizgrad/raster.hpp"
#include "vizgrad/remote.hpp"

namespace vizgrad::config {

// Where the rows come from: a CSV file, or the synthetic generator.
struct DatasetSource {
    std::string path;  // absolute after resolution
    data::CsvOptions csv;
    std::optional<data::SyntheticOptions> generate;
};

enum class JudgeKind { overplot, ink, contrast, remote };
enum class TranscriptMode { live, record, replay };

struct JudgeConfig {
    JudgeKind kind = JudgeKind::overplot;
    judge::OverplotParams overplot;
    double ink_target = 0.3;
    judge::ContrastParams contrast;
    // Comparative runs against an analytic judge compare its scores.
    double tie_eps = 1e-9;
    // remote
    remote::RemoteJudgeConfig remote;
    std::string url;  // empty: VIZGRAD_JUDGE_URL
    std::string transcript;
    TranscriptMode mode = TranscriptMode::live;
};

struct GradcheckConfig {
    double h = 1e-3;
    double p95_tolerance = 1e-3;
    double max_tolerance = 1e-2;
    // Relative error is |a - f| / max(|a|, |f|, floor).
    double floor = 1e-6;
};

struct RunConfig {
    DatasetSource dataset;
    std::vector<params::ParamSpec> params;
    raster::Layout layout;
    judge::Goal goal{"maximize the judge score", judge::GoalKind::pattern, {}};
    JudgeConfig judge;
    optim::OptimizerConfig optimizer;
    GradcheckConfig gradcheck;
    std::size_t replicates = 20;
    // Starting raw vector; empty means all zeros.
    std::vector<double> initial;
    std::string output = "out";
    std::uint64_t seed = 0;
    unsigned threads = 1;
    // Forces single-threaded rendering regardless of `threads`. One thread
    // is byte-reproducible either way.
    bool deterministic = false;
};

// Parses a JSON document. Relative paths resolve against `base_dir`.
RunConfig parse(std::string_view json_text, const std::string& base_dir = ".");
RunConfig load(const std::string& path);

// Fully resolved JSON: every default written out, paths absolute. Parsing
// it back yields the same configuration.
std::string resolved_json(const RunConfig& cfg);

// Checks referenced files and cross-field consistency. Throws
// ValidationError.
void validate(const RunConfig& cfg);

// Effective render thread count.
unsigned render_threads(const RunConfig& cfg) noexcept;

std::string_view to_string(JudgeKind k) noexcept;

}  // namespace vizgrad::config
