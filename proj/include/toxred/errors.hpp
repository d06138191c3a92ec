// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace toxred {

// Error taxonomy shared by all modules. The CLI maps kinds to exit codes:
// config -> 3, everything else -> 2 (usage errors are handled by the parser).
enum class ErrorKind {
  kIo,          // file unreadable / unwritable
  kFormat,      // malformed input data (bad JSONL, bad TSV, bad UTF-8)
  kConfig,      // invalid configuration or role separation violation
  kEndpoint,    // endpoint unreachable / failed after retries
  kParse,       // endpoint response did not match the declared contract
  kEvaluation,  // undefined metric (zero denominator, degenerate data)
  kInvalidArgument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kEndpoint: return "endpoint";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

[[noreturn]] inline void raise(ErrorKind kind, std::string message) {
  throw Error(kind, std::move(message));
}

}  // namespace toxred
