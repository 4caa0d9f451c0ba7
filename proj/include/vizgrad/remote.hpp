#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vizgrad/judge.hpp"

namespace vizgrad::remote {

// Request body sent to a remote judge:
//   { "model": ..., "prompt": ..., "images": [base64 PNG, ...] }
struct Request {
    std::string model;
    std::string prompt;
    std::vector<std::string> images;

    [[nodiscard]] std::string body() const;
};

// 16 hex digits of FNV-1a 64 over the request body.
std::string request_hash(std::string_view body);

// Moves one request body to a judge and returns the reply text (the "text"
// field of the reply JSON). Throws TransportError.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string post(const std::string& body) = 0;
    [[nodiscard]] virtual std::size_t requests() const noexcept = 0;
};

struct HttpConfig {
    std::string url;    // http://host:port/path
    std::string token;  // sent as "Authorization: Bearer <token>" when set
    std::chrono::milliseconds timeout{60000};
};

// Reads VIZGRAD_JUDGE_URL / VIZGRAD_JUDGE_TOKEN.
HttpConfig http_config_from_env();

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(HttpConfig config);
    std::string post(const std::string& body) override;
    [[nodiscard]] std::size_t requests() const noexcept override { return requests_; }

private:
    HttpConfig config_;
    std::string host_;
    int port_ = 80;
    std::string path_;
    std::size_t requests_ = 0;
};

// Replays a JSON-lines transcript of {request_hash, reply_text}. Repeated
// identical requests consume recorded replies in file order.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(const std::string& path);
    ReplayTransport(std::istream& in);
    std::string post(const std::string& body) override;
    [[nodiscard]] std::size_t requests() const noexcept override { return requests_; }

private:
    void load(std::istream& in);

    std::mutex mutex_;
    std::map<std::string, std::vector<std::string>> replies_;
    std::map<std::string, std::size_t> cursor_;
    std::size_t requests_ = 0;
};

// Forwards to another transport and appends every successful exchange to a
// transcript file.
class RecordingTransport final : public Transport {
public:
    RecordingTransport(std::unique_ptr<Transport> inner, const std::string& path);
    std::string post(const std::string& body) override;
    [[nodiscard]] std::size_t requests() const noexcept override { return inner_->requests(); }

private:
    std::mutex mutex_;
    std::unique_ptr<Transport> inner_;
    std::string path_;
};

// In-process transport driven by a callback; stands in for a judge server in
// tests. The callback receives the parsed request and the request count.
class MockTransport final : public Transport {
public:
    using Handler = std::function<std::string(const Request&, std::size_t index)>;
    explicit MockTransport(Handler handler) : handler_(std::move(handler)) {}
    std::string post(const std::string& body) override;
    [[nodiscard]] std::size_t requests() const noexcept override { return requests_; }

private:
    std::mutex mutex_;
    Handler handler_;
    std::size_t requests_ = 0;
};

Request parse_request(std::string_view body);

struct RemoteJudgeConfig {
    std::string model = "judge";
    std::string score_prompt =
        "Rate how well this visualization satisfies the goal: \"{goal}\". "
        "Reply with a single number between 0 and 1.";
    std::string compare_prompt =
        "Two visualizations are attached, FIRST and SECOND, in that order. Goal: \"{goal}\". "
        "Which one satisfies the goal better? Answer exactly FIRST, SECOND, or TIE.";
    std::size_t max_retries = 3;
    std::chrono::milliseconds backoff{500};  // doubles after each failed attempt
    bool debias = true;
    std::size_t max_concurrency = 4;
    // Injected so tests do not wait.
    std::function<void(std::chrono::milliseconds)> sleep;
};

// First number in the text that lies in [0,1]. Throws ParseError.
double parse_score(std::string_view reply);
// First case-insensitive whole-word FIRST / SECOND / TIE. Throws ParseError.
judge::Choice parse_choice(std::string_view reply);

// Sends with retries and exponential backoff on TransportError. ParseError
// is not retried.
std::string post_with_retry(Transport& transport, const std::string& body, const RemoteJudgeConfig& cfg);

class RemoteScoringJudge final : public judge::ScoringJudge {
public:
    RemoteScoringJudge(std::shared_ptr<Transport> transport, RemoteJudgeConfig cfg);
    [[nodiscard]] bool differentiable() const noexcept override { return false; }
    judge::Judgment judge(const Image& img, const judge::Goal& goal) override;
    [[nodiscard]] std::size_t calls() const noexcept override { return calls_; }

private:
    std::shared_ptr<Transport> transport_;
    RemoteJudgeConfig cfg_;
    std::size_t calls_ = 0;
};

class RemoteComparativeJudge final : public judge::ComparativeJudge {
public:
    RemoteComparativeJudge(std::shared_ptr<Transport> transport, RemoteJudgeConfig cfg);
    judge::Preference compare(const Image& first, const Image& second, const judge::Goal& goal) override;
    [[nodiscard]] std::size_t calls() const noexcept override { return calls_; }

private:
    std::shared_ptr<Transport> transport_;
    RemoteJudgeConfig cfg_;
    std::size_t calls_ = 0;
};

judge::Judgment judge_remote_score(const Image& img, const judge::Goal& goal, Transport& transport,
                                   const RemoteJudgeConfig& cfg);
judge::Preference judge_remote_compare(const Image& first, const Image& second, const judge::Goal& goal,
                                       Transport& transport, const RemoteJudgeConfig& cfg);

}  // namespace vizgrad::remote
