#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smplgan {

enum class ErrorKind {
  MissingAsset,
  MalformedAsset,
  InvalidSpec,
  NonFiniteResult,
  EmptyCaption,
  ShapeMismatch,
  InvalidCount,
  EmptySet,
  CardinalityMismatch,
  MissingFile,
  ChecksumMismatch,
  MalformedRecord,
  DivergenceDetected,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Validation errors are caused by bad input (exit code 1 in the CLI);
// everything else is a runtime failure (exit code 2).
bool is_validation_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void check(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingAsset: return "MissingAsset";
    case ErrorKind::MalformedAsset: return "MalformedAsset";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::NonFiniteResult: return "NonFiniteResult";
    case ErrorKind::EmptyCaption: return "EmptyCaption";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidCount: return "InvalidCount";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::CardinalityMismatch: return "CardinalityMismatch";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

inline bool is_validation_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonFiniteResult:
    case ErrorKind::DivergenceDetected:
      return false;
    default:
      return true;
  }
}

}  // namespace smplgan
