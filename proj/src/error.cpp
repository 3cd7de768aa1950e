#include "safle/error.hpp"

namespace safle {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NonPositiveGamma: return "NonPositiveGamma";
    case ErrorCode::AlreadyRegularized: return "AlreadyRegularized";
    case ErrorCode::NotRegularized: return "NotRegularized";
    case ErrorCode::GammaMismatch: return "GammaMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyClient: return "EmptyClient";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::ShapeOverflow: return "ShapeOverflow";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::NegativeEigenBeyondTolerance: return "NegativeEigenBeyondTolerance";
  }
  return "Unknown";
}

}  // namespace safle
