#pragma once

#include <string_view>

namespace hoa {

/// Outcome of an iterative refinement. Every solver returns a state whose
/// loss is no larger than the loss of its initialization.
enum class SolverStatus {
  kConverged,      // step norm fell below tolerance
  kMaxIterations,  // iteration cap reached
  kStalled,        // five consecutive rejected damping boosts
  kTooFewPoints,   // not enough data; initialization returned unchanged
};

std::string_view solver_status_name(SolverStatus status);

/// Regularizer and smoothness weights are stated against losses measured
/// in square millimeters; this converts them to the m^2 scale used by the
/// solvers.
inline constexpr double kWeightScale = 1e-6;

}  // namespace hoa
