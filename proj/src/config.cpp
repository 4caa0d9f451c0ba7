#include "vizgrad/config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>

#include "vizgrad/error.hpp"

namespace vizgrad::config {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void allow_keys(const json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto k : keys) known = known || k == key;
        if (!known) throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("bad value for '" + std::string(key) + "' in " + where);
    }
}

std::string resolve_path(const std::string& path, const std::string& base) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_relative()) p = fs::path(base) / p;
    return fs::absolute(p).lexically_normal().string();
}

// ---------------------------------------------------------------- operands

raster::Operand operand_from(const json& j, const std::string& where) {
    if (j.is_string()) return raster::Operand::of(j.get<std::string>());
    if (j.is_number()) return raster::Operand::fixed({j.get<double>()});
    if (j.is_array()) {
        try {
            return raster::Operand::fixed(j.get<std::vector<double>>());
        } catch (const json::exception&) {
        }
    }
    throw ValidationError(where + " must be a number, a number array, or a parameter name");
}

json operand_to(const raster::Operand& op) {
    if (op.is_param()) return op.param;
    return op.literal;
}

raster::EncodingMap map_from(const json& j, const std::string& where) {
    allow_keys(j, {"attribute", "attributes", "choice", "domain", "coeffs", "range"}, where);
    raster::EncodingMap m;
    if (j.contains("attribute")) m.attributes = {j.at("attribute").get<std::string>()};
    read(j, "attributes", m.attributes, where);
    read(j, "choice", m.choice, where);
    if (j.contains("domain")) m.domain = operand_from(j.at("domain"), where + " domain");
    if (j.contains("coeffs")) m.coeffs = operand_from(j.at("coeffs"), where + " coeffs");
    if (j.contains("range")) m.range = operand_from(j.at("range"), where + " range");
    return m;
}

json map_to(const raster::EncodingMap& m) {
    json j;
    j["attributes"] = m.attributes;
    if (!m.choice.empty()) j["choice"] = m.choice;
    if (m.domain) j["domain"] = operand_to(*m.domain);
    j["coeffs"] = operand_to(m.coeffs);
    j["range"] = operand_to(m.range);
    return j;
}

raster::ChartSpec chart_from(const json& j, const std::string& where) {
    allow_keys(j,
               {"width", "height", "background", "smoothing", "margin", "axes", "x", "y", "size", "color", "opacity"},
               where);
    raster::ChartSpec c;
    read(j, "width", c.width, where);
    read(j, "height", c.height, where);
    read(j, "background", c.background, where);
    read(j, "smoothing", c.smoothing, where);
    read(j, "margin", c.margin, where);
    read(j, "axes", c.axes, where);
    if (!j.contains("x") || !j.contains("y")) throw ValidationError(where + " needs x and y encodings");
    c.x = map_from(j.at("x"), where + " x");
    c.y = map_from(j.at("y"), where + " y");
    if (j.contains("size")) {
        const auto& s = j.at("size");
        if (s.is_object()) c.size = map_from(s, where + " size");
        else c.size = operand_from(s, where + " size");
    }
    if (j.contains("color")) {
        const auto& s = j.at("color");
        if (s.is_object()) {
            allow_keys(s, {"map", "colormap"}, where + " color");
            raster::MappedColor mc;
            if (!s.contains("map")) throw ValidationError(where + " color needs a map");
            mc.map = map_from(s.at("map"), where + " color map");
            if (s.contains("colormap")) {
                const auto& cm = s.at("colormap");
                allow_keys(cm, {"start", "delta_luminance", "end_chroma"}, where + " colormap");
                if (cm.contains("start")) mc.colormap.start = operand_from(cm.at("start"), where + " colormap start");
                if (cm.contains("delta_luminance")) {
                    mc.colormap.delta_luminance = operand_from(cm.at("delta_luminance"), where + " colormap delta");
                }
                if (cm.contains("end_chroma")) {
                    mc.colormap.end_chroma = operand_from(cm.at("end_chroma"), where + " colormap end");
                }
            }
            c.color = mc;
        } else {
            c.color = operand_from(s, where + " color");
        }
    }
    if (j.contains("opacity")) c.opacity = operand_from(j.at("opacity"), where + " opacity");
    return c;
}

json chart_to(const raster::ChartSpec& c) {
    json j;
    j["width"] = c.width;
    j["height"] = c.height;
    j["background"] = c.background;
    j["smoothing"] = c.smoothing;
    j["margin"] = c.margin;
    j["axes"] = c.axes;
    j["x"] = map_to(c.x);
    j["y"] = map_to(c.y);
    if (const auto* op = std::get_if<raster::Operand>(&c.size)) j["size"] = operand_to(*op);
    else j["size"] = map_to(std::get<raster::EncodingMap>(c.size));
    if (const auto* op = std::get_if<raster::Operand>(&c.color)) {
        j["color"] = operand_to(*op);
    } else {
        const auto& mc = std::get<raster::MappedColor>(c.color);
        j["color"] = {{"map", map_to(mc.map)},
                      {"colormap",
                       {{"start", operand_to(mc.colormap.start)},
                        {"delta_luminance", operand_to(mc.colormap.delta_luminance)},
                        {"end_chroma", operand_to(mc.colormap.end_chroma)}}}};
    }
    j["opacity"] = operand_to(c.opacity);
    return j;
}

raster::Layout layout_from(const json& j) {
    const std::string where = "layout";
    allow_keys(j, {"width", "height", "background", "smoothing", "min_extent", "overlap_weight", "overlap_smoothing",
                   "views"},
               where);
    raster::Layout l;
    read(j, "width", l.width, where);
    read(j, "height", l.height, where);
    read(j, "background", l.background, where);
    read(j, "smoothing", l.smoothing, where);
    read(j, "min_extent", l.min_extent, where);
    read(j, "overlap_weight", l.overlap_weight, where);
    read(j, "overlap_smoothing", l.overlap_smoothing, where);
    if (!j.contains("views") || !j.at("views").is_array()) throw ValidationError("layout needs a views array");
    std::size_t i = 0;
    for (const auto& v : j.at("views")) {
        const std::string vw = "view " + std::to_string(i++);
        allow_keys(v, {"rect", "chart"}, vw);
        raster::View view;
        if (v.contains("rect")) view.rect = operand_from(v.at("rect"), vw + " rect");
        if (!v.contains("chart")) throw ValidationError(vw + " needs a chart");
        view.chart = chart_from(v.at("chart"), vw + " chart");
        l.views.push_back(std::move(view));
    }
    return l;
}

json layout_to(const raster::Layout& l) {
    json j;
    j["width"] = l.width;
    j["height"] = l.height;
    j["background"] = l.background;
    j["smoothing"] = l.smoothing;
    j["min_extent"] = l.min_extent;
    j["overlap_weight"] = l.overlap_weight;
    j["overlap_smoothing"] = l.overlap_smoothing;
    j["views"] = json::array();
    for (const auto& v : l.views) {
        json jv;
        if (v.rect) jv["rect"] = operand_to(*v.rect);
        jv["chart"] = chart_to(v.chart);
        j["views"].push_back(jv);
    }
    return j;
}

// ---------------------------------------------------------------- params

params::ParamSpec spec_from(const json& j) {
    allow_keys(j, {"name", "kind", "lo", "hi", "len", "options", "temperature"}, "parameter");
    params::ParamSpec s;
    read(j, "name", s.name, "parameter");
    const std::string where = "parameter '" + s.name + "'";
    std::string kind = "bounded_scalar";
    read(j, "kind", kind, where);
    s.kind = params::parse_kind(kind);
    read(j, "lo", s.lo, where);
    read(j, "hi", s.hi, where);
    read(j, "len", s.len, where);
    read(j, "options", s.num_options, where);
    read(j, "temperature", s.temperature, where);
    if (s.kind == params::ParamKind::ordered_pair) s.len = 2;
    if (s.kind == params::ParamKind::bounded_scalar) s.len = 1;
    return s;
}

json spec_to(const params::ParamSpec& s) {
    json j;
    j["name"] = s.name;
    j["kind"] = std::string(params::to_string(s.kind));
    switch (s.kind) {
    case params::ParamKind::bounded_scalar:
    case params::ParamKind::ordered_pair:
        j["lo"] = s.lo;
        j["hi"] = s.hi;
        break;
    case params::ParamKind::bounded_vector:
        j["lo"] = s.lo;
        j["hi"] = s.hi;
        j["len"] = s.len;
        break;
    case params::ParamKind::unit_interval_vector: j["len"] = s.len; break;
    case params::ParamKind::categorical:
        j["options"] = s.num_options;
        j["temperature"] = s.temperature;
        break;
    }
    return j;
}

// Initial point given as realized values per parameter name.
std::vector<double> initial_from_realized(const json& j, const std::vector<params::ParamSpec>& specs) {
    auto schema = std::make_shared<const params::ParamSchema>(specs);
    auto realized = params::constrain(params::ParamVector::zeros(schema));
    auto values = realized.values();
    for (const auto& [name, v] : j.items()) {
        const auto idx = schema->find(name);
        if (!idx) throw ValidationError("initial value for unknown parameter '" + name + "'");
        std::vector<double> given;
        if (v.is_number()) given = {v.get<double>()};
        else if (v.is_array()) given = v.get<std::vector<double>>();
        else throw ValidationError("initial value for '" + name + "' must be numeric");
        const auto& spec = schema->specs()[*idx];
        if (given.size() != spec.raw_size()) {
            throw ValidationError("initial value for '" + name + "' needs " + std::to_string(spec.raw_size()) +
                                  " numbers");
        }
        std::copy(given.begin(), given.end(), values.begin() + static_cast<std::ptrdiff_t>(schema->offset(*idx)));
    }
    return params::unconstrain(realized).raw;
}

// ---------------------------------------------------------------- sections

data::SyntheticKind synthetic_kind(const std::string& s) {
    if (s == "gaussian_blobs") return data::SyntheticKind::gaussian_blobs;
    if (s == "correlated") return data::SyntheticKind::correlated;
    if (s == "uniform") return data::SyntheticKind::uniform;
    throw ValidationError("unknown synthetic dataset kind '" + s + "'");
}

std::string synthetic_name(data::SyntheticKind k) {
    switch (k) {
    case data::SyntheticKind::gaussian_blobs: return "gaussian_blobs";
    case data::SyntheticKind::correlated: return "correlated";
    case data::SyntheticKind::uniform: return "uniform";
    }
    return "?";
}

DatasetSource dataset_from(const json& j, const std::string& base) {
    allow_keys(j, {"path", "header", "delimiter", "missing", "generate"}, "dataset");
    DatasetSource d;
    read(j, "path", d.path, "dataset");
    d.path = resolve_path(d.path, base);
    read(j, "header", d.csv.header, "dataset");
    if (j.contains("delimiter")) {
        const auto s = j.at("delimiter").get<std::string>();
        if (s.size() != 1) throw ValidationError("dataset delimiter must be one character");
        d.csv.delimiter = s[0];
    }
    if (j.contains("missing")) {
        const auto s = j.at("missing").get<std::string>();
        if (s == "drop_row") d.csv.missing = data::MissingPolicy::drop_row;
        else if (s == "error") d.csv.missing = data::MissingPolicy::error;
        else throw ValidationError("dataset missing policy must be drop_row or error");
    }
    if (j.contains("generate")) {
        const auto& g = j.at("generate");
        allow_keys(g, {"kind", "rows", "clusters", "spread", "correlation", "seed"}, "dataset generate");
        data::SyntheticOptions o;
        std::string kind = synthetic_name(o.kind);
        read(g, "kind", kind, "dataset generate");
        o.kind = synthetic_kind(kind);
        read(g, "rows", o.rows, "dataset generate");
        read(g, "clusters", o.clusters, "dataset generate");
        read(g, "spread", o.spread, "dataset generate");
        read(g, "correlation", o.correlation, "dataset generate");
        read(g, "seed", o.seed, "dataset generate");
        d.generate = o;
    }
    if (d.path.empty() == !d.generate) throw ValidationError("dataset needs exactly one of path or generate");
    return d;
}

json dataset_to(const DatasetSource& d) {
    json j;
    if (d.generate) {
        const auto& o = *d.generate;
        j["generate"] = {{"kind", synthetic_name(o.kind)}, {"rows", o.rows},          {"clusters", o.clusters},
                         {"spread", o.spread},             {"correlation", o.correlation}, {"seed", o.seed}};
    } else {
        j["path"] = d.path;
    }
    j["header"] = d.csv.header;
    j["delimiter"] = std::string(1, d.csv.delimiter);
    j["missing"] = d.csv.missing == data::MissingPolicy::drop_row ? "drop_row" : "error";
    return j;
}

JudgeKind judge_kind(const std::string& s) {
    for (auto k : {JudgeKind::overplot, JudgeKind::ink, JudgeKind::contrast, JudgeKind::remote}) {
        if (to_string(k) == s) return k;
    }
    throw ValidationError("unknown judge '" + s + "'");
}

JudgeConfig judge_from(const json& j, const std::string& base) {
    const std::string where = "judge";
    allow_keys(j, {"kind", "threshold", "sharpness", "target", "background", "scale", "tie_eps", "model",
                   "score_prompt", "compare_prompt", "max_retries", "backoff_ms", "debias", "max_concurrency", "url",
                   "transcript", "mode"},
               where);
    JudgeConfig c;
    std::string kind = "overplot";
    read(j, "kind", kind, where);
    c.kind = judge_kind(kind);
    read(j, "threshold", c.overplot.threshold, where);
    read(j, "sharpness", c.overplot.sharpness, where);
    read(j, "target", c.ink_target, where);
    read(j, "background", c.contrast.background, where);
    read(j, "scale", c.contrast.scale, where);
    read(j, "tie_eps", c.tie_eps, where);
    read(j, "model", c.remote.model, where);
    read(j, "score_prompt", c.remote.score_prompt, where);
    read(j, "compare_prompt", c.remote.compare_prompt, where);
    read(j, "max_retries", c.remote.max_retries, where);
    if (j.contains("backoff_ms")) c.remote.backoff = std::chrono::milliseconds(j.at("backoff_ms").get<long long>());
    read(j, "debias", c.remote.debias, where);
    read(j, "max_concurrency", c.remote.max_concurrency, where);
    read(j, "url", c.url, where);
    read(j, "transcript", c.transcript, where);
    c.transcript = resolve_path(c.transcript, base);
    std::string mode = "live";
    read(j, "mode", mode, where);
    if (mode == "live") c.mode = TranscriptMode::live;
    else if (mode == "record") c.mode = TranscriptMode::record;
    else if (mode == "replay") c.mode = TranscriptMode::replay;
    else throw ValidationError("judge mode must be live, record, or replay");
    return c;
}

json judge_to(const JudgeConfig& c) {
    json j;
    j["kind"] = std::string(to_string(c.kind));
    switch (c.kind) {
    case JudgeKind::overplot:
        j["threshold"] = c.overplot.threshold;
        j["sharpness"] = c.overplot.sharpness;
        break;
    case JudgeKind::ink: j["target"] = c.ink_target; break;
    case JudgeKind::contrast:
        j["background"] = c.contrast.background;
        j["scale"] = c.contrast.scale;
        break;
    case JudgeKind::remote:
        j["model"] = c.remote.model;
        j["score_prompt"] = c.remote.score_prompt;
        j["compare_prompt"] = c.remote.compare_prompt;
        j["max_retries"] = c.remote.max_retries;
        j["backoff_ms"] = c.remote.backoff.count();
        j["debias"] = c.remote.debias;
        j["max_concurrency"] = c.remote.max_concurrency;
        if (!c.url.empty()) j["url"] = c.url;
        if (!c.transcript.empty()) j["transcript"] = c.transcript;
        j["mode"] = c.mode == TranscriptMode::live ? "live" : c.mode == TranscriptMode::record ? "record" : "replay";
        break;
    }
    j["tie_eps"] = c.tie_eps;
    return j;
}

optim::NoiseMode noise_mode(const std::string& s) {
    if (s == "fresh") return optim::NoiseMode::fresh;
    if (s == "fixed") return optim::NoiseMode::fixed;
    if (s == "none") return optim::NoiseMode::none;
    throw ValidationError("optimizer noise must be fresh, fixed, or none");
}

std::string noise_name(optim::NoiseMode m) {
    switch (m) {
    case optim::NoiseMode::fresh: return "fresh";
    case optim::NoiseMode::fixed: return "fixed";
    case optim::NoiseMode::none: return "none";
    }
    return "?";
}

optim::OptimizerConfig optimizer_from(const json& j) {
    const std::string where = "optimizer";
    allow_keys(j, {"kind", "max_iters", "judge_budget", "step", "beta1", "beta2", "epsilon", "noise", "anneal",
                   "anneal_rate", "temperature_floor", "straight_through", "perturbation", "step_decay",
                   "perturbation_decay", "stall_iterations", "sigma", "grow", "shrink", "tie_shrink", "sigma_floor",
                   "window", "tolerance"},
               where);
    optim::OptimizerConfig c;
    std::string kind = "gradient";
    read(j, "kind", kind, where);
    c.kind = optim::parse_optimizer_kind(kind);
    read(j, "max_iters", c.max_iters, where);
    read(j, "judge_budget", c.judge_budget, where);
    read(j, "step", c.step, where);
    read(j, "beta1", c.beta1, where);
    read(j, "beta2", c.beta2, where);
    read(j, "epsilon", c.epsilon, where);
    if (j.contains("noise")) c.noise = noise_mode(j.at("noise").get<std::string>());
    read(j, "anneal", c.anneal, where);
    read(j, "anneal_rate", c.anneal_rate, where);
    read(j, "temperature_floor", c.temperature_floor, where);
    read(j, "straight_through", c.straight_through, where);
    read(j, "perturbation", c.perturbation, where);
    read(j, "step_decay", c.step_decay, where);
    read(j, "perturbation_decay", c.perturbation_decay, where);
    read(j, "stall_iterations", c.stall_iterations, where);
    read(j, "sigma", c.sigma, where);
    read(j, "grow", c.grow, where);
    read(j, "shrink", c.shrink, where);
    read(j, "tie_shrink", c.tie_shrink, where);
    read(j, "sigma_floor", c.sigma_floor, where);
    read(j, "window", c.window, where);
    read(j, "tolerance", c.tolerance, where);
    return c;
}

json optimizer_to(const optim::OptimizerConfig& c) {
    return {{"kind", std::string(optim::to_string(c.kind))},
            {"max_iters", c.max_iters},
            {"judge_budget", c.judge_budget},
            {"step", c.step},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"noise", noise_name(c.noise)},
            {"anneal", c.anneal},
            {"anneal_rate", c.anneal_rate},
            {"temperature_floor", c.temperature_floor},
            {"straight_through", c.straight_through},
            {"perturbation", c.perturbation},
            {"step_decay", c.step_decay},
            {"perturbation_decay", c.perturbation_decay},
            {"stall_iterations", c.stall_iterations},
            {"sigma", c.sigma},
            {"grow", c.grow},
            {"shrink", c.shrink},
            {"tie_shrink", c.tie_shrink},
            {"sigma_floor", c.sigma_floor},
            {"window", c.window},
            {"tolerance", c.tolerance}};
}

judge::GoalKind goal_kind(const std::string& s) {
    if (s == "pattern") return judge::GoalKind::pattern;
    if (s == "aesthetic") return judge::GoalKind::aesthetic;
    if (s == "task") return judge::GoalKind::task;
    throw ValidationError("goal kind must be pattern, aesthetic, or task");
}

std::string goal_kind_name(judge::GoalKind k) {
    switch (k) {
    case judge::GoalKind::pattern: return "pattern";
    case judge::GoalKind::aesthetic: return "aesthetic";
    case judge::GoalKind::task: return "task";
    }
    return "?";
}

}  // namespace

std::string_view to_string(JudgeKind k) noexcept {
    switch (k) {
    case JudgeKind::overplot: return "overplot";
    case JudgeKind::ink: return "ink";
    case JudgeKind::contrast: return "contrast";
    case JudgeKind::remote: return "remote";
    }
    return "?";
}

RunConfig parse(std::string_view json_text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    allow_keys(j, {"dataset", "params", "chart", "layout", "goal", "judge", "optimizer", "gradcheck", "replicates",
                   "initial", "output", "seed", "threads", "deterministic"},
               "config");
    RunConfig c;
    try {
        if (!j.contains("dataset")) throw ValidationError("config needs a dataset");
        c.dataset = dataset_from(j.at("dataset"), base_dir);
        if (j.contains("params")) {
            if (!j.at("params").is_array()) throw ValidationError("params must be an array");
            for (const auto& s : j.at("params")) c.params.push_back(spec_from(s));
        }
        if (j.contains("chart") == j.contains("layout")) throw ValidationError("config needs exactly one of chart or layout");
        c.layout = j.contains("chart") ? raster::Layout::single(chart_from(j.at("chart"), "chart"))
                                       : layout_from(j.at("layout"));
        if (j.contains("goal")) {
            const auto& g = j.at("goal");
            if (g.is_string()) {
                c.goal.text = g.get<std::string>();
            } else {
                allow_keys(g, {"text", "kind", "targets"}, "goal");
                read(g, "text", c.goal.text, "goal");
                if (g.contains("kind")) c.goal.kind = goal_kind(g.at("kind").get<std::string>());
                read(g, "targets", c.goal.targets, "goal");
            }
        }
        if (j.contains("judge")) c.judge = judge_from(j.at("judge"), base_dir);
        if (j.contains("optimizer")) c.optimizer = optimizer_from(j.at("optimizer"));
        if (j.contains("gradcheck")) {
            const auto& g = j.at("gradcheck");
            allow_keys(g, {"h", "p95_tolerance", "max_tolerance", "floor"}, "gradcheck");
            read(g, "h", c.gradcheck.h, "gradcheck");
            read(g, "p95_tolerance", c.gradcheck.p95_tolerance, "gradcheck");
            read(g, "max_tolerance", c.gradcheck.max_tolerance, "gradcheck");
            read(g, "floor", c.gradcheck.floor, "gradcheck");
        }
        read(j, "replicates", c.replicates, "config");
        if (j.contains("initial")) {
            const auto& init = j.at("initial");
            if (init.is_object()) c.initial = initial_from_realized(init, c.params);
            else read(j, "initial", c.initial, "config");
        }
        read(j, "output", c.output, "config");
        c.output = resolve_path(c.output, base_dir);
        read(j, "seed", c.seed, "config");
        read(j, "threads", c.threads, "config");
        read(j, "deterministic", c.deterministic, "config");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config value: ") + e.what());
    }
    c.optimizer.seed = c.seed;
    return c;
}

RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto base = fs::absolute(fs::path(path)).parent_path().string();
    try {
        return parse(ss.str(), base);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string resolved_json(const RunConfig& c) {
    json j;
    j["dataset"] = dataset_to(c.dataset);
    j["params"] = json::array();
    for (const auto& s : c.params) j["params"].push_back(spec_to(s));
    j["layout"] = layout_to(c.layout);
    j["goal"] = {{"text", c.goal.text}, {"kind", goal_kind_name(c.goal.kind)}, {"targets", c.goal.targets}};
    j["judge"] = judge_to(c.judge);
    j["optimizer"] = optimizer_to(c.optimizer);
    j["gradcheck"] = {{"h", c.gradcheck.h},
                      {"p95_tolerance", c.gradcheck.p95_tolerance},
                      {"max_tolerance", c.gradcheck.max_tolerance},
                      {"floor", c.gradcheck.floor}};
    j["replicates"] = c.replicates;
    j["initial"] = c.initial;
    j["output"] = c.output;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["deterministic"] = c.deterministic;
    return j.dump(2) + "\n";
}

void validate(const RunConfig& c) {
    if (!c.dataset.generate && !fs::is_regular_file(c.dataset.path)) {
        throw ValidationError("dataset file '" + c.dataset.path + "' does not exist");
    }
    if (c.judge.kind == JudgeKind::remote && c.judge.mode != TranscriptMode::live && c.judge.transcript.empty()) {
        throw ValidationError("record and replay modes need a transcript path");
    }
    if (c.judge.mode == TranscriptMode::replay && !fs::is_regular_file(c.judge.transcript)) {
        throw ValidationError("transcript '" + c.judge.transcript + "' does not exist");
    }
    if (c.threads == 0) throw ValidationError("threads must be >= 1");
    const params::ParamSchema schema(c.params);
    if (!c.initial.empty() && c.initial.size() != schema.raw_dim()) {
        throw ValidationError("initial raw vector has length " + std::to_string(c.initial.size()) + ", schema needs " +
                              std::to_string(schema.raw_dim()));
    }
    c.optimizer.check();
    if (c.optimizer.kind == optim::OptimizerKind::gradient && c.judge.kind == JudgeKind::remote) {
        throw ValidationError("the gradient optimizer needs a differentiable judge; remote judges are not");
    }
    if (!(c.gradcheck.h > 0.0)) throw ValidationError("gradcheck step must be positive");
}

unsigned render_threads(const RunConfig& c) noexcept { return c.deterministic ? 1u : std::max(1u, c.threads); }

}  // namespace vizgrad::config
