#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affpipe {

// Error categories. Each maps to a distinct CLI exit code (see docs/cli.md).
enum class ErrorKind {
    Io,          // file missing, unreadable or unwritable
    Parse,       // malformed text (bad column count, non-numeric, truncated)
    Validation,  // well-formed but violates a domain rule (range, duplicate)
    Schema,      // dimension/version/header mismatch
    Contract,    // precondition of an operation violated by the caller
    Numerical,   // non-finite values during computation
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw Error(ErrorKind::Contract, message);
}

}  // namespace affpipe
