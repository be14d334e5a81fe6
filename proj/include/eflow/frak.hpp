#pragma once

// The ellipticity operators
//
//   B_t = D_t (Upsilon_t^T + mu)^{-1} D_t^*
//   D_t = Upsilon_t - mu + 4 B_t          (written frakD below)
//
// Both need the shift Upsilon_t^T + mu to stay invertible with margin eps/2.

#include <string>

#include "eflow/flow.hpp"
#include "eflow/linalg.hpp"

namespace eflow {

namespace detail {

/// Cholesky factor of Upsilon^T + mu, after checking lambda_min >= eps/2.
inline Eigen::LLT<Matrix> shifted_factor(const Matrix& upsilon, const FlowProblem& p) {
  const Matrix shifted = hermitian_part(upsilon.transpose()) + p.mu * identity(upsilon.rows());
  const double lmin = lambda_min(shifted);
  if (lmin < 0.5 * p.epsilon) {
    throw Error(Errc::ShiftNotInvertible,
                "lambda_min(Upsilon^T + mu) = " + std::to_string(lmin) + " < epsilon/2");
  }
  return Eigen::LLT<Matrix>(shifted);
}

inline Matrix frak_b_from(const Matrix& upsilon, const Matrix& d, const FlowProblem& p) {
  const Eigen::LLT<Matrix> llt = shifted_factor(upsilon, p);
  const Matrix solved = llt.solve(Matrix(d.adjoint()));
  return hermitian_part(d * solved);
}

}  // namespace detail

inline Matrix frakB(const FlowState& state, const FlowProblem& problem) {
  return detail::frak_b_from(state.upsilon(problem), state.d, problem);
}

inline Matrix frakD(const FlowState& state, const FlowProblem& problem) {
  const Matrix ups = state.upsilon(problem);
  const Matrix b = detail::frak_b_from(ups, state.d, problem);
  return hermitian_part(ups - problem.mu * identity(ups.rows()) + 4.0 * b);
}

/// zeta(t) = inf spectrum of frakD_t.
inline double zeta(const FlowState& state, const FlowProblem& problem) {
  return lambda_min(frakD(state, problem));
}

/// frakD_0 of the initial data.
inline Matrix frakD0(const FlowProblem& problem) {
  const Index n = problem.dim();
  return frakD(FlowState{0.0, Matrix::Zero(n, n), problem.d0}, problem);
}

}  // namespace eflow
