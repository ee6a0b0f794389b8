#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hoa {

/// Failure categories surfaced by the library. Each maps to a stable
/// kebab-case name that appears at the start of `Error::what()`.
enum class ErrorCode {
  kBehindCamera,
  kDegeneratePair,
  kOpenMesh,
  kGradientOutOfBand,
  kCalibrationUnderconstrained,
  kUntrackedFrame,
  kEmptyCloud,
  kJointUnobserved,
  kJointInconsistent,
  kJointEmpty,
  kNoObjects,
  kInvalidArgument,
  kEmptyInput,
  kIo,
  kFormat,
  kMissingInput,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hoa
