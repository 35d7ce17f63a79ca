#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msdi {

enum class ErrorCode {
  InvalidArgument,
  UnsupportedKind,
  OutsideDomain,
  NoPotential,
  EmptyZeroSet,
  EmptyIntersection,
  InvalidProbe,
  ReductionUnsupported,
  InitialConditionOutsideDomain,
  IncompatibleMetric,
  DegenerateWindow,
  NotStronglyMonotone,
  NotStronglyConvex,
  MissingAuxiliary,
  ScheduleOff,
  GridMismatch,
  IoFailure,
  ParseError,
  ValidationError,
  MissingManifest,
  NonFiniteState,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::OutsideDomain: return "OutsideDomain";
    case ErrorCode::NoPotential: return "NoPotential";
    case ErrorCode::EmptyZeroSet: return "EmptyZeroSet";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::InvalidProbe: return "InvalidProbe";
    case ErrorCode::ReductionUnsupported: return "ReductionUnsupported";
    case ErrorCode::InitialConditionOutsideDomain: return "InitialConditionOutsideDomain";
    case ErrorCode::IncompatibleMetric: return "IncompatibleMetric";
    case ErrorCode::DegenerateWindow: return "DegenerateWindow";
    case ErrorCode::NotStronglyMonotone: return "NotStronglyMonotone";
    case ErrorCode::NotStronglyConvex: return "NotStronglyConvex";
    case ErrorCode::MissingAuxiliary: return "MissingAuxiliary";
    case ErrorCode::ScheduleOff: return "ScheduleOff";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
  }
  return "Unknown";
}

/// Library error. Every failure carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed scenario text. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                         std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A scenario field that violates one of its rules.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string rule)
      : Error(ErrorCode::ValidationError, field + ": " + rule),
        field_(std::move(field)),
        rule_(std::move(rule)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string field_;
  std::string rule_;
};

}  // namespace msdi
