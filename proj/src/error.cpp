#include "cinesr/error.hpp"

namespace cinesr {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::SeriesNotFound: return "SeriesNotFound";
    case ErrorCode::CorruptFrame: return "CorruptFrame";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ClipTooShort: return "ClipTooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::ConfigModeMismatch: return "ConfigModeMismatch";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidScheduleParams: return "InvalidScheduleParams";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::BackboneUnavailable: return "BackboneUnavailable";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DataUnavailable: return "DataUnavailable";
  }
  return "UnknownError";
}

}  // namespace cinesr
