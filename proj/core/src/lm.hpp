#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) over normal equations. Steps
// are accepted only when the loss strictly decreases, so the returned state
// never has a larger loss than the initialization.

#include <algorithm>

#include <Eigen/Dense>

#include "hoa/solver.hpp"

namespace hoa::detail {

struct NormalEquations {
  Eigen::MatrixXd hessian;   // J^T J (scaled like the loss)
  Eigen::VectorXd gradient;  // J^T r
  double loss = 0.0;
};

struct LmOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-6;
  int max_rejections = 5;
  double initial_damping = 1e-4;
  double relative_damping_floor = 1e-3;
};

template <typename State>
struct LmResult {
  State state;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  SolverStatus status = SolverStatus::kMaxIterations;
};

/// `linearize(state)` returns NormalEquations at a state, `loss(state)`
/// evaluates the objective, `apply(state, delta)` returns the stepped state.
template <typename State, typename Linearize, typename Loss, typename Apply>
LmResult<State> levenberg_marquardt(const State& init, Linearize&& linearize,
                                    Loss&& loss, Apply&& apply,
                                    const LmOptions& options) {
  LmResult<State> result;
  result.state = init;
  NormalEquations ne = linearize(result.state);
  result.initial_loss = ne.loss;
  result.final_loss = ne.loss;
  double damping = options.initial_damping;
  int rejections = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    Eigen::MatrixXd a = ne.hessian;
    const Eigen::Index n = a.rows();
    // Floor the Marquardt scale so nearly unobserved parameters stay damped.
    const double floor = options.relative_damping_floor * ne.hessian.diagonal().maxCoeff() + 1e-12;
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i, i) += damping * std::max(ne.hessian(i, i), floor);
    }
    const Eigen::VectorXd delta = a.ldlt().solve(-ne.gradient);
    if (!delta.allFinite()) {
      result.status = SolverStatus::kStalled;
      return result;
    }
    const bool tiny = delta.norm() < options.step_tolerance;
    State candidate = apply(result.state, delta);
    const double candidate_loss = loss(candidate);
    if (candidate_loss < result.final_loss) {
      result.state = std::move(candidate);
      result.final_loss = candidate_loss;
      damping = std::max(damping / 3.0, 1e-12);
      rejections = 0;
      if (tiny) {
        result.status = SolverStatus::kConverged;
        return result;
      }
      ne = linearize(result.state);
    } else {
      if (tiny && rejections == 0) {
        result.status = SolverStatus::kConverged;
        return result;
      }
      damping *= 4.0;
      if (++rejections >= options.max_rejections) {
        result.status = SolverStatus::kStalled;
        return result;
      }
    }
  }
  result.status = SolverStatus::kMaxIterations;
  return result;
}

}  // namespace hoa::detail
