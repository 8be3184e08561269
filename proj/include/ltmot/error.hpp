#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ltmot {

enum class ErrorCode {
  // mot-io
  MalformedLine,
  InvalidValue,
  MissingKey,
  ParseError,
  DuplicateObservation,
  Io,
  // longtail-stats
  EmptyDataset,
  NonPositiveThreshold,
  // sva
  NotApplicable,
  EmptyPlan,
  NoVisibleTemplate,
  MissingFrame,
  MissingMask,
  // dva
  MaskCoversEverything,
  DimensionMismatch,
  InvalidThreshold,
  ServiceUnreachable,
  ServiceError,
  // gs
  EmptyClassSet,
  LabelOutsideGroups,
  SchemaError,
  // cli
  Config,
  Usage,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateObservation: return "DuplicateObservation";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonPositiveThreshold: return "NonPositiveThreshold";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::NoVisibleTemplate: return "NoVisibleTemplate";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::MissingMask: return "MissingMask";
    case ErrorCode::MaskCoversEverything: return "MaskCoversEverything";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::ServiceUnreachable: return "ServiceUnreachable";
    case ErrorCode::ServiceError: return "ServiceError";
    case ErrorCode::EmptyClassSet: return "EmptyClassSet";
    case ErrorCode::LabelOutsideGroups: return "LabelOutsideGroups";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Usage: return "UsageError";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` names the
/// condition and `what()` carries the located detail (file, line, key, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error with `context` prepended to the detail.
  Error within(const std::string& context) const { return Error(code_, context + ": " + detail_); }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace ltmot
