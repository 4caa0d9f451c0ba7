#include "vizgrad/remote.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "vizgrad/error.hpp"
#include "vizgrad/rng.hpp"

namespace vizgrad::remote {

using json = nlohmann::json;

namespace {

std::string instantiate(std::string templ, const std::string& goal) {
    const std::string key = "{goal}";
    for (auto at = templ.find(key); at != std::string::npos; at = templ.find(key, at + goal.size())) {
        templ.replace(at, key.size(), goal);
    }
    return templ;
}

std::string png_base64(const Image& img) { return base64_encode(encode_png(img)); }

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

void default_sleep(std::chrono::milliseconds ms) { std::this_thread::sleep_for(ms); }

judge::Choice flip(judge::Choice c) {
    switch (c) {
    case judge::Choice::first: return judge::Choice::second;
    case judge::Choice::second: return judge::Choice::first;
    default: return judge::Choice::tie;
    }
}

}  // namespace

std::string Request::body() const {
    json j;
    j["model"] = model;
    j["prompt"] = prompt;
    j["images"] = images;
    return j.dump();
}

Request parse_request(std::string_view body) {
    try {
        const auto j = json::parse(body);
        return Request{j.at("model").get<std::string>(), j.at("prompt").get<std::string>(),
                       j.at("images").get<std::vector<std::string>>()};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed judge request: ") + e.what());
    }
}

std::string request_hash(std::string_view body) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(body)));
    return buf;
}

// ---------------------------------------------------------------- transports

HttpConfig http_config_from_env() {
    HttpConfig cfg;
    if (const char* url = std::getenv("VIZGRAD_JUDGE_URL")) cfg.url = url;
    if (const char* token = std::getenv("VIZGRAD_JUDGE_TOKEN")) cfg.token = token;
    return cfg;
}

HttpTransport::HttpTransport(HttpConfig config) : config_(std::move(config)) {
    constexpr std::string_view scheme = "http://";
    std::string_view url = config_.url;
    if (url.substr(0, scheme.size()) != scheme) {
        throw ValidationError("judge endpoint must be an http:// URL (set VIZGRAD_JUDGE_URL)");
    }
    url.remove_prefix(scheme.size());
    const auto slash = url.find('/');
    const std::string_view authority = url.substr(0, slash);
    path_ = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
    const auto colon = authority.rfind(':');
    host_ = std::string(authority.substr(0, colon));
    if (colon != std::string_view::npos) {
        const auto digits = authority.substr(colon + 1);
        if (std::from_chars(digits.data(), digits.data() + digits.size(), port_).ec != std::errc{}) {
            throw ValidationError("judge endpoint has a bad port");
        }
    }
    if (host_.empty()) throw ValidationError("judge endpoint has no host");
}

std::string HttpTransport::post(const std::string& body) {
    ++requests_;
    httplib::Client client(host_, port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) throw TransportError("judge request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("judge replied with HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body).at("text").get<std::string>();
    } catch (const json::exception&) {
        throw TransportError("judge reply is not JSON with a \"text\" field");
    }
}

ReplayTransport::ReplayTransport(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open transcript '" + path + "'");
    load(in);
}

ReplayTransport::ReplayTransport(std::istream& in) { load(in); }

void ReplayTransport::load(std::istream& in) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            replies_[j.at("request_hash").get<std::string>()].push_back(j.at("reply_text").get<std::string>());
        } catch (const json::exception&) {
            throw ValidationError("transcript line " + std::to_string(n) + " is malformed");
        }
    }
}

std::string ReplayTransport::post(const std::string& body) {
    std::lock_guard lock(mutex_);
    ++requests_;
    const auto hash = request_hash(body);
    const auto it = replies_.find(hash);
    auto& at = cursor_[hash];
    if (it == replies_.end() || at >= it->second.size()) {
        throw TransportError("transcript has no recorded reply for request " + hash);
    }
    return it->second[at++];
}

RecordingTransport::RecordingTransport(std::unique_ptr<Transport> inner, const std::string& path)
    : inner_(std::move(inner)), path_(path) {
    std::ofstream truncate(path_, std::ios::trunc);
    if (!truncate) throw ValidationError("cannot write transcript '" + path_ + "'");
}

std::string RecordingTransport::post(const std::string& body) {
    std::lock_guard lock(mutex_);
    auto reply = inner_->post(body);
    std::ofstream out(path_, std::ios::app);
    out << json{{"request_hash", request_hash(body)}, {"reply_text", reply}}.dump() << '\n';
    return reply;
}

std::string MockTransport::post(const std::string& body) {
    std::lock_guard lock(mutex_);
    return handler_(parse_request(body), requests_++);
}

// ---------------------------------------------------------------- parsing

double parse_score(std::string_view reply) {
    std::size_t i = 0;
    while (i < reply.size()) {
        const char c = reply[i];
        const bool starts = std::isdigit(static_cast<unsigned char>(c)) ||
                            (c == '.' && i + 1 < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i + 1])));
        if (!starts) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
        if (j < reply.size() && reply[j] == '.') {
            ++j;
            while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
        }
        double v = 0.0;
        std::from_chars(reply.data() + i, reply.data() + j, v);
        const bool negative = i > 0 && reply[i - 1] == '-';
        if (!negative && v >= 0.0 && v <= 1.0) return v;
        i = j;
    }
    throw ParseError("judge reply contains no number in [0,1]", std::string(reply));
}

judge::Choice parse_choice(std::string_view reply) {
    std::string lower(reply);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    std::size_t best = std::string::npos;
    judge::Choice choice = judge::Choice::tie;
    for (const auto& [token, value] : {std::pair{"first", judge::Choice::first}, std::pair{"second", judge::Choice::second},
                                       std::pair{"tie", judge::Choice::tie}}) {
        const std::string_view t = token;
        for (auto at = lower.find(t); at != std::string::npos; at = lower.find(t, at + 1)) {
            const bool left_ok = at == 0 || !word_char(lower[at - 1]);
            const bool right_ok = at + t.size() >= lower.size() || !word_char(lower[at + t.size()]);
            if (left_ok && right_ok) {
                if (at < best) {
                    best = at;
                    choice = value;
                }
                break;
            }
        }
    }
    if (best == std::string::npos) throw ParseError("judge reply names none of FIRST, SECOND, TIE", std::string(reply));
    return choice;
}

std::string post_with_retry(Transport& transport, const std::string& body, const RemoteJudgeConfig& cfg) {
    auto delay = cfg.backoff;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return transport.post(body);
        } catch (const ParseError&) {
            throw;
        } catch (const TransportError& e) {
            if (attempt >= cfg.max_retries) {
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt + 1) + " attempts)");
            }
        }
        (cfg.sleep ? cfg.sleep : default_sleep)(delay);
        delay *= 2;
    }
}

// ---------------------------------------------------------------- judges

judge::Judgment judge_remote_score(const Image& img, const judge::Goal& goal, Transport& transport,
                                   const RemoteJudgeConfig& cfg) {
    goal.check();
    const Request req{cfg.model, instantiate(cfg.score_prompt, goal.text), {png_base64(img)}};
    const auto reply = post_with_retry(transport, req.body(), cfg);
    judge::Judgment j;
    j.score = parse_score(reply);
    j.rationale = reply;
    return j;
}

judge::Preference judge_remote_compare(const Image& first, const Image& second, const judge::Goal& goal,
                                       Transport& transport, const RemoteJudgeConfig& cfg) {
    goal.check();
    const auto a = png_base64(first);
    const auto b = png_base64(second);
    const auto prompt = instantiate(cfg.compare_prompt, goal.text);
    const Request forward{cfg.model, prompt, {a, b}};

    auto ask = [&](const Request& req) {
        const auto reply = post_with_retry(transport, req.body(), cfg);
        return std::pair{parse_choice(reply), reply};
    };

    if (!cfg.debias) {
        auto [choice, reply] = ask(forward);
        return judge::Preference{choice, std::nullopt, reply};
    }
    const Request swapped{cfg.model, prompt, {b, a}};
    std::pair<judge::Choice, std::string> r1, r2;
    if (cfg.max_concurrency >= 2) {
        auto f1 = std::async(std::launch::async, ask, std::cref(forward));
        auto f2 = std::async(std::launch::async, ask, std::cref(swapped));
        // get() both before rethrowing so neither future outlives this frame.
        std::exception_ptr error;
        try { r1 = f1.get(); } catch (...) { error = std::current_exception(); }
        try { r2 = f2.get(); } catch (...) { if (!error) error = std::current_exception(); }
        if (error) std::rethrow_exception(error);
    } else {
        r1 = ask(forward);
        r2 = ask(swapped);
    }
    const auto second_view = flip(r2.first);
    judge::Preference p;
    p.choice = r1.first == second_view ? r1.first : judge::Choice::tie;
    p.confidence = r1.first == second_view ? 1.0 : 0.5;
    p.rationale = "forward: " + r1.second + "\nswapped: " + r2.second;
    return p;
}

RemoteScoringJudge::RemoteScoringJudge(std::shared_ptr<Transport> transport, RemoteJudgeConfig cfg)
    : transport_(std::move(transport)), cfg_(std::move(cfg)) {
    if (!transport_) throw ValidationError("remote judge needs a transport");
}

judge::Judgment RemoteScoringJudge::judge(const Image& img, const judge::Goal& goal) {
    ++calls_;
    return judge_remote_score(img, goal, *transport_, cfg_);
}

RemoteComparativeJudge::RemoteComparativeJudge(std::shared_ptr<Transport> transport, RemoteJudgeConfig cfg)
    : transport_(std::move(transport)), cfg_(std::move(cfg)) {
    if (!transport_) throw ValidationError("remote judge needs a transport");
}

judge::Preference RemoteComparativeJudge::compare(const Image& first, const Image& second, const judge::Goal& goal) {
    calls_ += cfg_.debias ? 2 : 1;
    return judge_remote_compare(first, second, goal, *transport_, cfg_);
}

}  // namespace vizgrad::remote
