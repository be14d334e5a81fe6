#pragma once

// Conserved and monotone quantities of the flow, the unconventional
// ellipse/hyperbola predicates, and a trajectory audit.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "eflow/evolution.hpp"
#include "eflow/flow.hpp"
#include "eflow/frak.hpp"
#include "eflow/linalg.hpp"

namespace eflow {

/// tr(Upsilon_t^2 + 4 D_t D_t^*), conserved when D_0^T = +-D_0.
inline double motion_trace(const FlowState& state, const FlowProblem& problem) {
  const Matrix ups = state.upsilon(problem);
  return (ups * ups).trace().real() + 4.0 * state.d.squaredNorm();
}

/// K_t = Upsilon_t D_t - D_t Upsilon_t^T.
inline Matrix K_matrix(const FlowState& state, const FlowProblem& problem) {
  const Matrix ups = state.upsilon(problem);
  return ups * state.d - state.d * ups.transpose();
}

inline double commutation_defect(const FlowProblem& p) {
  const Matrix k = p.upsilon0 * p.d0 - p.d0 * p.upsilon0.transpose();
  return k.norm() / std::max(1.0, p.upsilon0.norm() * p.d0.norm());
}

inline bool is_commuting(const FlowProblem& p, double tol = 1e-10) {
  return commutation_defect(p) <= tol;
}

/// ||Upsilon_t^2 + 4 D_t D_t^* - Upsilon_0^2 - 4 D_0 D_0^*||_2 for commuting data.
inline double commutative_motion_residual(const FlowState& state, const FlowProblem& problem) {
  if (!is_commuting(problem)) {
    throw Error(Errc::NotCommutingInitialData, "Upsilon0 D0 != D0 Upsilon0^T");
  }
  const Matrix ups = state.upsilon(problem);
  const Matrix now = ups * ups + 4.0 * state.d * state.d.adjoint();
  const Matrix init = problem.upsilon0 * problem.upsilon0 + 4.0 * problem.d0 * problem.d0.adjoint();
  return (now - init).norm();
}

// ---------------------------------------------------------------------------
// Unconventional ellipses and hyperbolas.

struct EllipseParams {
  double gamma = 1.0;
  double beta = 1.0;
  double alpha = 0.0;
};

enum class ConicKind { Ellipse, Hyperbola };

namespace detail {

/// X - gamma + s (gamma^2/beta^2) Y (X^T + gamma)^{-1} Y^*, s = +1 ellipse, -1 hyperbola.
inline Matrix conic_operator(const Matrix& x, const Matrix& y, const EllipseParams& p,
                             ConicKind kind) {
  if (p.gamma == 0.0 || p.beta == 0.0) {
    throw Error(Errc::GammaInSpectrum, "gamma and beta must be nonzero");
  }
  if (x.rows() != x.cols() || y.rows() != x.rows() || y.cols() != x.cols()) {
    throw Error(Errc::DimensionMismatch, "X and Y must be square of equal size");
  }
  const Index n = x.rows();
  const Matrix shifted = x.transpose() + p.gamma * identity(n);
  const Eigen::ComplexEigenSolver<Matrix> ev(shifted, false);
  if (ev.eigenvalues().cwiseAbs().minCoeff() < 1e-10) {
    throw Error(Errc::GammaInSpectrum, "-gamma lies in the spectrum of X^T");
  }
  const Matrix solved = shifted.partialPivLu().solve(Matrix(y.adjoint()));
  const double s = kind == ConicKind::Ellipse ? 1.0 : -1.0;
  const double ratio = p.gamma * p.gamma / (p.beta * p.beta);
  return x - p.gamma * identity(n) + s * ratio * (y * solved);
}

}  // namespace detail

inline double ellipse_residual(const Matrix& x, const Matrix& y, const EllipseParams& p,
                               ConicKind kind = ConicKind::Ellipse) {
  return detail::conic_operator(x, y, p, kind).norm();
}

struct EllipticBoundedness {
  bool above = false;
  bool below = false;
  double lambda_max = 0.0;  // witness for `above`
  double lambda_min = 0.0;  // witness for `below`
};

/// Relative elliptical boundedness of X with respect to Y, against alpha^2.
inline EllipticBoundedness elliptic_boundedness(const Matrix& x, const Matrix& y,
                                                const EllipseParams& p) {
  const Matrix e = detail::conic_operator(x, y, p, ConicKind::Ellipse);
  const RealVector ev = hermitian_eigenvalues(e);
  const double a2 = p.alpha * p.alpha;
  EllipticBoundedness out;
  out.lambda_max = ev.maxCoeff();
  out.lambda_min = ev.minCoeff();
  out.above = out.lambda_max <= a2;
  out.below = out.lambda_min >= a2;
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory audit.

struct InvariantSample {
  double t = 0.0;
  double tr_motion = 0.0;
  double zeta = 0.0;
  double frakD_op_norm = 0.0;
  double frakB_trace_norm = 0.0;
  double K_residual = 0.0;         // ||K_t - W_{t,0} K_0 W_{t,0}^T||_2 / (1 + ||K_0||_2)
  double symmetry_residual = 0.0;  // ||D^T - sign D||_2 of the raw interpolant
};

enum class Direction { Increasing, Decreasing, Constant };

inline std::string to_string(Direction d) {
  switch (d) {
    case Direction::Increasing: return "increasing";
    case Direction::Decreasing: return "decreasing";
    case Direction::Constant: return "constant";
  }
  return "constant";
}

struct InvariantVerdicts {
  double motion_drift = 0.0;  // max |tr_motion(t) - tr_motion(0)| / (1 + |tr_motion(0)|)
  bool zeta_monotone = true;
  Direction zeta_direction = Direction::Constant;
  bool frakD_norm_decreasing = true;
  bool frakB_trace_decreasing = true;  // asserted only when frakD_0 >= 0
  bool frakB_op_decreasing = true;     // asserted only when frakD_0 >= 0
  bool frakD0_psd = false;
  double hs_budget_min_slack = 0.0;    // min over s<=t of 4|B_s|_1 - 16 int_s^t |D|_2^2 - 4|B_t|_1
  bool hs_budget_ok = true;
  double frakD_lower_bound_min = 0.0;  // min_t lambda_min(frakD_t) + 2 mu, must be >= 0
  double max_K_residual = 0.0;

  /// All asserted verdicts at the given drift tolerance.
  bool all_ok(double drift_tol = 1e-8) const {
    return motion_drift <= drift_tol && zeta_monotone && frakD_norm_decreasing &&
           frakB_trace_decreasing && frakB_op_decreasing && hs_budget_ok &&
           frakD_lower_bound_min >= -1e-10;
  }
};

struct InvariantReport {
  std::vector<InvariantSample> samples;
  InvariantVerdicts verdicts;
};

struct AuditOptions {
  double monotone_tol = 1e-7;
  bool transport_K = true;
};

inline InvariantReport audit(const Trajectory& traj, const AuditOptions& opt = {}) {
  const FlowProblem& p = traj.problem();
  const double sign = sign_of(p.symmetry);
  const Index n = p.dim();
  const std::vector<double> times = sample_times(traj);

  InvariantReport report;
  report.samples.reserve(times.size());
  std::vector<double> frakB_op;
  frakB_op.reserve(times.size());

  const Matrix k0 = K_matrix(traj.states().front(), p);
  const double k0_norm = k0.norm();
  Matrix w = identity(n);

  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const FlowState st = dense_eval(traj, t);
    InvariantSample smp;
    smp.t = t;
    smp.tr_motion = motion_trace(st, p);
    const Matrix b = frakB(st, p);
    const Matrix fd = hermitian_part(st.upsilon(p) - p.mu * identity(n) + 4.0 * b);
    const RealVector fd_eig = hermitian_eigenvalues(fd);
    smp.zeta = fd_eig.minCoeff();
    smp.frakD_op_norm = fd_eig.cwiseAbs().maxCoeff();
    const RealVector b_eig = hermitian_eigenvalues(b);
    smp.frakB_trace_norm = b_eig.cwiseAbs().sum();
    frakB_op.push_back(b_eig.cwiseAbs().maxCoeff());
    const Matrix raw_d = traj.raw_eval(t).rightCols(n);
    smp.symmetry_residual = (raw_d.transpose() - sign * raw_d).norm();
    if (opt.transport_K && !p.is_constant()) {
      if (i > 0) w = evolve_W(traj, times[i - 1], t, traj.config()).w * w;
      smp.K_residual = (K_matrix(st, p) - w * k0 * w.transpose()).norm() / (1.0 + k0_norm);
    }
    report.samples.push_back(smp);
  }

  InvariantVerdicts& v = report.verdicts;
  const auto& s = report.samples;
  const double tol = opt.monotone_tol;
  const double zeta0 = s.front().zeta;
  v.frakD0_psd = zeta0 >= -1e-10;
  v.frakD_lower_bound_min = std::numeric_limits<double>::infinity();

  bool zeta_up = true, zeta_down = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    v.motion_drift = std::max(v.motion_drift, std::abs(s[i].tr_motion - s.front().tr_motion) /
                                                  (1.0 + std::abs(s.front().tr_motion)));
    v.max_K_residual = std::max(v.max_K_residual, s[i].K_residual);
    v.frakD_lower_bound_min = std::min(v.frakD_lower_bound_min, s[i].zeta + 2.0 * p.mu);
    if (i == 0) continue;
    if (s[i].zeta < s[i - 1].zeta - tol) zeta_up = false;
    if (s[i].zeta > s[i - 1].zeta + tol) zeta_down = false;
    if (s[i].frakD_op_norm > s[i - 1].frakD_op_norm + tol) v.frakD_norm_decreasing = false;
    if (v.frakD0_psd) {
      if (s[i].frakB_trace_norm > s[i - 1].frakB_trace_norm + tol) v.frakB_trace_decreasing = false;
      if (frakB_op[i] > frakB_op[i - 1] + tol) v.frakB_op_decreasing = false;
    }
  }

  // zeta(0) < 0: increasing with values in [zeta(0), 0).
  // zeta(0) >= 0: decreasing with values in [0, zeta(0)].
  if (zeta0 < 0.0) {
    v.zeta_direction = Direction::Increasing;
    bool in_range = std::all_of(s.begin(), s.end(), [&](const InvariantSample& x) {
      return x.zeta >= zeta0 - tol && x.zeta <= tol;
    });
    v.zeta_monotone = zeta_up && in_range;
  } else {
    v.zeta_direction = Direction::Decreasing;
    bool in_range = std::all_of(s.begin(), s.end(), [&](const InvariantSample& x) {
      return x.zeta >= -tol && x.zeta <= zeta0 + tol;
    });
    v.zeta_monotone = zeta_down && in_range;
  }
  if (p.is_constant()) v.zeta_direction = Direction::Constant;

  // 16 int_s^t |D|_2^2 + 4 |B_t|_1 <= 4 |B_s|_1, i.e. g(t) = 16 I(t) + 4 |B_t|_1 is
  // nonincreasing on the grid.
  v.hs_budget_min_slack = 0.0;
  if (v.frakD0_psd) {
    const std::vector<double> cum = cumulative_hs_integral(traj, times);
    double running_min = std::numeric_limits<double>::infinity();
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double g = 16.0 * cum[i] + 4.0 * s[i].frakB_trace_norm;
      if (i > 0) slack = std::min(slack, running_min - g);
      running_min = std::min(running_min, g);
    }
    v.hs_budget_min_slack = s.size() > 1 ? slack : 0.0;
    v.hs_budget_ok = slack >= -tol;
  }
  return report;
}

}  // namespace eflow
