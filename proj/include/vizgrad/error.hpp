#pragma once

#include <stdexcept>
#include <string>

namespace vizgrad {

// Process exit codes used by the command line driver.
enum class ExitCode : int {
    ok = 0,
    validation = 2,
    transport = 3,
    numeric = 4,
    gradcheck_failed = 5,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Bad input: malformed data, inconsistent config, violated precondition.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ExitCode::validation, what) {}
};

// Remote judge could not be reached or its reply could not be used.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what) : Error(ExitCode::transport, what) {}
};

// Reply arrived but did not contain a usable answer; the raw text is kept.
class ParseError : public TransportError {
public:
    ParseError(const std::string& what, std::string raw)
        : TransportError(what), raw_reply_(std::move(raw)) {}

    [[nodiscard]] const std::string& raw_reply() const noexcept { return raw_reply_; }

private:
    std::string raw_reply_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

}  // namespace vizgrad
