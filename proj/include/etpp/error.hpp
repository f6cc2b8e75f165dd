// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace etpp {

enum class ErrorKind {
    kInvalidArgument,
    kShape,
    kParse,
    kIo,
    kNumeric,
    kVersion,
    kData,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kInvalidArgument: return "invalid_argument";
        case ErrorKind::kShape: return "shape";
        case ErrorKind::kParse: return "parse";
        case ErrorKind::kIo: return "io";
        case ErrorKind::kNumeric: return "numeric";
        case ErrorKind::kVersion: return "version";
        case ErrorKind::kData: return "data";
    }
    return "unknown";
}

/// Library-wide exception. The kind is surfaced by the CLI as a
/// machine-parseable prefix (`error[kind]: message`).
class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

   private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace etpp
