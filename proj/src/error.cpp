#include "contesta/error.hpp"

namespace contesta {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::InvalidEpoch: return "InvalidEpoch";
    case ErrorCode::MissingEpoch: return "MissingEpoch";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::CvFoldTooSmall: return "CvFoldTooSmall";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::SingleClassTestSet: return "SingleClassTestSet";
    case ErrorCode::UnknownFeature: return "UnknownFeature";
    case ErrorCode::StaticFeatureRejected: return "StaticFeatureRejected";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::InsufficientReference: return "InsufficientReference";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::Conflict:
      return false;
    default:
      return true;
  }
}

}  // namespace contesta
