#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contesta {

enum class ErrorCode {
  // signals
  ZeroVariance,
  LengthMismatch,
  SeriesTooShort,
  DegenerateDistribution,
  InvalidEpoch,
  MissingEpoch,
  // cohort
  InvalidRecord,
  ConstantColumn,
  Underdetermined,
  ClassTooSmall,
  // models
  SingleClassTrainingSet,
  CvFoldTooSmall,
  MissingFeature,
  SingleClassTestSet,
  // explainers
  UnknownFeature,
  StaticFeatureRejected,
  InvalidArgument,
  DegenerateRange,
  InsufficientReference,
  // synth
  InvalidConfig,
  // plumbing
  ParseError,
  NotFound,
  Conflict,
  IoError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Validation errors are caused by bad input; everything else is a runtime failure.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace contesta
