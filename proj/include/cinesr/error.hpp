#pragma once

#include <stdexcept>
#include <string>

namespace cinesr {

enum class ErrorCode {
  RootNotFound,
  SeriesNotFound,
  CorruptFrame,
  MissingFrame,
  InvalidConfig,
  ClipTooShort,
  ShapeMismatch,
  InvalidScale,
  ConfigModeMismatch,
  ShapeError,
  DimensionMismatch,
  InvalidScheduleParams,
  StepOutOfRange,
  TooSmall,
  BackboneUnavailable,
  CheckpointMismatch,
  ConfigError,
  DataUnavailable,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace cinesr
