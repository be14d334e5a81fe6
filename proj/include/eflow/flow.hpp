#pragma once

// The elliptic operator-valued flow
//
//   d/dt Delta_t = 16 D_t D_t^*
//   d/dt D_t     = -2 (Upsilon_t D_t + D_t Upsilon_t^T),   Upsilon_t = Upsilon_0 + Delta_t
//
// with Delta_0 = 0, integrated by an adaptive Dormand-Prince 5(4) scheme.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eflow/dopri5.hpp"
#include "eflow/error.hpp"
#include "eflow/linalg.hpp"

namespace eflow {

/// Initial data (Upsilon_0, D_0, mu, epsilon, E_0).
struct FlowProblem {
  Matrix upsilon0;
  Matrix d0;
  Symmetry symmetry = Symmetry::Symmetric;
  double mu = 0.0;
  double epsilon = 0.0;
  double e0 = 0.0;

  Index dim() const { return upsilon0.rows(); }
  /// D_0 == 0: the flow is constant.
  bool is_constant() const { return d0.isZero(0.0); }
};

/// Checks the standing hypotheses. Throws InvalidProblem naming the violated one.
inline void validate(const FlowProblem& p, double tol = 1e-10) {
  const Index n = p.upsilon0.rows();
  if (n < 1 || p.upsilon0.cols() != n) {
    throw Error(Errc::InvalidProblem, "Upsilon0 must be a non-empty square matrix");
  }
  if (p.d0.rows() != n || p.d0.cols() != n) {
    throw Error(Errc::DimensionMismatch, "D0 must have the same dimension as Upsilon0");
  }
  if (!p.upsilon0.allFinite() || !p.d0.allFinite() || !std::isfinite(p.mu) ||
      !std::isfinite(p.epsilon) || !std::isfinite(p.e0)) {
    throw Error(Errc::InvalidProblem, "non-finite entries in initial data");
  }
  if (hermitian_defect(p.upsilon0) > tol) {
    throw Error(Errc::InvalidProblem, "Upsilon0 = Upsilon0* violated");
  }
  const double dnorm = p.d0.norm();
  if (dnorm > 0.0 && (p.d0.transpose() - sign_of(p.symmetry) * p.d0).norm() > tol * dnorm) {
    throw Error(Errc::InvalidProblem, std::string("D0^T = ") +
                                          (p.symmetry == Symmetry::Symmetric ? "+" : "-") +
                                          "D0 violated");
  }
  if (!(p.epsilon > 0.0)) throw Error(Errc::InvalidProblem, "epsilon > 0 violated");
  const double lmin = lambda_min(p.upsilon0);
  if (lmin < -(p.mu - p.epsilon) - tol * std::max(1.0, std::abs(lmin))) {
    throw Error(Errc::InvalidProblem, "Upsilon0 >= -(mu - epsilon) 1 violated (lambda_min = " +
                                          std::to_string(lmin) + ")");
  }
}

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_init = 0.0;         // 0: min(1e-3, h_max)
  double h_max = 0.0;          // 0: min(1, t_max)
  double t_max = 0.0;          // 0: 50 / max(epsilon, 0.1)
  double stop_tol = 1e-10;     // halt once ||D_t||_2 < stop_tol
  double sample_stride = 0.0;  // 0: t_end / 200
};

/// Fills the zero-valued defaults from the problem and checks the invariants.
inline IntegratorConfig resolve(IntegratorConfig cfg, const FlowProblem& p) {
  if (cfg.t_max <= 0.0) cfg.t_max = 50.0 / std::max(p.epsilon, 0.1);
  if (cfg.h_max <= 0.0) cfg.h_max = std::min(1.0, cfg.t_max);
  if (cfg.h_init <= 0.0) cfg.h_init = std::min(1e-3, cfg.h_max);
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0) || !(cfg.stop_tol > 0.0)) {
    throw Error(Errc::InvalidConfig, "rtol, atol and stop_tol must be positive");
  }
  if (!(cfg.h_init > 0.0 && cfg.h_init <= cfg.h_max && cfg.h_max <= cfg.t_max)) {
    throw Error(Errc::InvalidConfig, "0 < h_init <= h_max <= t_max violated");
  }
  if (cfg.sample_stride < 0.0) throw Error(Errc::InvalidConfig, "sample_stride must be positive");
  if (cfg.rtol < 4.0 * std::numeric_limits<double>::epsilon()) {
    throw Error(Errc::ToleranceUnreachable, "rtol below machine precision");
  }
  return cfg;
}

struct FlowState {
  double t = 0.0;
  Matrix delta;
  Matrix d;

  Matrix upsilon(const FlowProblem& p) const { return p.upsilon0 + delta; }
};

struct TrajectoryStats {
  int steps = 0;
  int rejected_steps = 0;
  bool reached_stop = false;
  double final_d_hs_norm = 0.0;
  /// max over accepted steps of ||D^T - sign D||_2 / ||D||_2 before re-projection
  double max_symmetry_residual = 0.0;
  /// max over accepted steps of ||D_t||_op / (e^{4 mu h} ||D_s||_op) - 1, floored at 0
  double max_growth_excess = 0.0;
};

/// Accepted steps of an integration with their continuous extensions.
/// Immutable after construction.
class Trajectory {
 public:
  Trajectory(FlowProblem problem, IntegratorConfig config, std::vector<FlowState> states,
             std::vector<dopri5::DenseCoefficients> dense, TrajectoryStats stats)
      : problem_(std::move(problem)),
        config_(config),
        states_(std::move(states)),
        dense_(std::move(dense)),
        stats_(stats) {}

  const FlowProblem& problem() const { return problem_; }
  const IntegratorConfig& config() const { return config_; }
  const std::vector<FlowState>& states() const { return states_; }
  const std::vector<dopri5::DenseCoefficients>& dense() const { return dense_; }
  const TrajectoryStats& stats() const { return stats_; }

  double t_end() const { return states_.back().t; }
  const FlowState& final_state() const { return states_.back(); }
  Index dim() const { return problem_.dim(); }

  /// Index of the step containing t (t in [t_i, t_{i+1}]).
  std::size_t step_index(double t) const {
    auto it = std::upper_bound(states_.begin(), states_.end(), t,
                               [](double v, const FlowState& s) { return v < s.t; });
    std::size_t idx = static_cast<std::size_t>(std::distance(states_.begin(), it));
    idx = idx == 0 ? 0 : idx - 1;
    return std::min(idx, dense_.empty() ? 0 : dense_.size() - 1);
  }

  /// Raw interpolant (Delta | D) stacked side by side, without projection.
  Matrix raw_eval(double t) const {
    if (dense_.empty()) return pack(states_.front());
    return dense_[step_index(t)].eval(t);
  }

  Matrix pack(const FlowState& s) const {
    Matrix y(dim(), 2 * dim());
    y << s.delta, s.d;
    return y;
  }

 private:
  FlowProblem problem_;
  IntegratorConfig config_;
  std::vector<FlowState> states_;
  std::vector<dopri5::DenseCoefficients> dense_;
  TrajectoryStats stats_;
};

namespace detail {

inline Matrix flow_rhs_packed(const Matrix& y, const Matrix& upsilon0) {
  const Index n = upsilon0.rows();
  const auto delta = y.leftCols(n);
  const auto d = y.rightCols(n);
  const Matrix ups = upsilon0 + delta;
  Matrix out(n, 2 * n);
  out.leftCols(n) = 16.0 * (d * d.adjoint());
  out.rightCols(n) = -2.0 * (ups * d + d * ups.transpose());
  return out;
}

inline FlowState unpack(double t, const Matrix& y, Index n) {
  return FlowState{t, y.leftCols(n), y.rightCols(n)};
}

inline FlowState project(FlowState s, Symmetry sym) {
  s.delta = hermitian_part(s.delta);
  s.d = symmetry_part(s.d, sym);
  return s;
}

}  // namespace detail

/// Right-hand side (dDelta, dD) at a state.
inline std::pair<Matrix, Matrix> rhs(const FlowState& state, const FlowProblem& problem) {
  const Index n = problem.dim();
  if (state.delta.rows() != n || state.delta.cols() != n || state.d.rows() != n ||
      state.d.cols() != n) {
    throw Error(Errc::DimensionMismatch, "state and problem dimensions differ");
  }
  const Matrix ups = problem.upsilon0 + state.delta;
  Matrix d_delta = hermitian_part(16.0 * (state.d * state.d.adjoint()));
  Matrix d_d = -2.0 * (ups * state.d + state.d * ups.transpose());
  return {std::move(d_delta), std::move(d_d)};
}

/// Integrates the flow from t = 0 until t_max or ||D_t||_2 < stop_tol.
inline Trajectory integrate(const FlowProblem& problem, const IntegratorConfig& config_in = {}) {
  validate(problem);
  const IntegratorConfig cfg = resolve(config_in, problem);
  const Index n = problem.dim();
  const double sign = sign_of(problem.symmetry);

  FlowState s0{0.0, Matrix::Zero(n, n), problem.d0};
  std::vector<FlowState> states{s0};
  std::vector<dopri5::DenseCoefficients> dense;
  TrajectoryStats stats;

  if (problem.is_constant()) {
    // Two knots spanning [0, t_max] with a constant interpolant.
    FlowState s1 = s0;
    s1.t = cfg.t_max;
    dopri5::DenseCoefficients dc;
    dc.t0 = 0.0;
    dc.h = cfg.t_max;
    Matrix y(n, 2 * n);
    y << s0.delta, s0.d;
    dc.r = {y, Matrix::Zero(n, 2 * n), Matrix::Zero(n, 2 * n), Matrix::Zero(n, 2 * n),
            Matrix::Zero(n, 2 * n)};
    dense.push_back(std::move(dc));
    states.push_back(s1);
    stats.steps = 1;
    stats.reached_stop = true;
    return Trajectory(problem, cfg, std::move(states), std::move(dense), stats);
  }

  const double ups0_op = hermitian_eigenvalues(problem.upsilon0).cwiseAbs().maxCoeff();
  auto f = [&](double, const Matrix& y) { return detail::flow_rhs_packed(y, problem.upsilon0); };

  Matrix y(n, 2 * n);
  y << s0.delta, s0.d;
  Matrix k1 = f(0.0, y);
  double t = 0.0;
  double h = cfg.h_init;
  double delta_op = 0.0;
  double d_op = op_norm(problem.d0);
  dopri5::Controller controller;
  int consecutive_rejects = 0;

  while (t < cfg.t_max) {
    const double stiff = ups0_op + delta_op;
    if (stiff > 0.0) h = std::min(h, 0.5 / stiff);
    h = std::min({h, cfg.h_max, cfg.t_max - t});
    if (cfg.t_max - t - h < 1e-12 * cfg.t_max) h = cfg.t_max - t;
    if (h < 1e-14 * cfg.t_max) {
      throw Error(Errc::StepSizeUnderflow, "step " + std::to_string(h) + " at t = " + std::to_string(t));
    }

    dopri5::Trial trial = dopri5::attempt(f, t, y, k1, h, cfg.rtol, cfg.atol);
    if (!(trial.error <= 1.0)) {
      ++stats.rejected_steps;
      if (++consecutive_rejects > 200) {
        throw Error(Errc::ToleranceUnreachable, "too many consecutive rejected steps at t = " +
                                                    std::to_string(t));
      }
      h = controller.propose(h, trial.error, false);
      continue;
    }
    consecutive_rejects = 0;

    const double t_new = (t + h >= cfg.t_max - 1e-12 * cfg.t_max) ? cfg.t_max : t + h;
    FlowState raw = detail::unpack(t_new, trial.y_new, n);
    const double d_hs = raw.d.norm();
    if (d_hs > 0.0) {
      stats.max_symmetry_residual =
          std::max(stats.max_symmetry_residual, (raw.d.transpose() - sign * raw.d).norm() / d_hs);
    }
    FlowState next = detail::project(std::move(raw), problem.symmetry);
    Matrix y_next(n, 2 * n);
    y_next << next.delta, next.d;

    const double d_op_new = op_norm(next.d);
    if (d_op > 0.0) {
      const double bound = std::exp(4.0 * problem.mu * h) * d_op;
      stats.max_growth_excess = std::max(stats.max_growth_excess, d_op_new / bound - 1.0);
    }

    dense.push_back(dopri5::make_dense(t, t_new - t, y, y_next, trial));
    states.push_back(next);
    ++stats.steps;

    const double h_used = h;
    h = controller.propose(h_used, trial.error, true);
    t = t_new;
    y = std::move(y_next);
    k1 = std::move(trial.k7);
    d_op = d_op_new;
    delta_op = hermitian_eigenvalues(next.delta).cwiseAbs().maxCoeff();

    if (next.d.norm() < cfg.stop_tol) {
      stats.reached_stop = true;
      break;
    }
  }
  stats.final_d_hs_norm = states.back().d.norm();
  return Trajectory(problem, cfg, std::move(states), std::move(dense), stats);
}

/// Interpolated state at time t. Stored knots are returned exactly; other
/// times use the step's continuous extension followed by structure projection.
inline FlowState dense_eval(const Trajectory& traj, double t) {
  const auto& states = traj.states();
  if (!(t >= 0.0) || t > traj.t_end()) {
    throw Error(Errc::OutOfRange, "t = " + std::to_string(t) + " outside [0, " +
                                      std::to_string(traj.t_end()) + "]");
  }
  const std::size_t i = traj.step_index(t);
  if (states[i].t == t) return states[i];
  if (i + 1 < states.size() && states[i + 1].t == t) return states[i + 1];
  FlowState s = detail::unpack(t, traj.dense()[i].eval(t), traj.dim());
  return detail::project(std::move(s), traj.problem().symmetry);
}

/// Sample grid with spacing sample_stride (default t_end / 200), always
/// including 0 and t_end.
inline std::vector<double> sample_times(const Trajectory& traj) {
  const double t_end = traj.t_end();
  std::vector<double> out{0.0};
  if (t_end <= 0.0) return out;
  const double stride =
      traj.config().sample_stride > 0.0 ? traj.config().sample_stride : t_end / 200.0;
  const auto count = static_cast<std::size_t>(std::floor(t_end / stride + 1e-9));
  for (std::size_t k = 1; k <= count; ++k) {
    const double t = static_cast<double>(k) * stride;
    if (t < t_end * (1.0 - 1e-12)) out.push_back(t);
  }
  out.push_back(t_end);
  return out;
}

/// int_a^b ||D_tau||_2^2 dtau by 5-point Gauss-Legendre on each step's
/// continuous extension (exact for the interpolant polynomial).
inline double hs_norm_squared_integral(const Trajectory& traj, double a, double b) {
  if (b <= a) return 0.0;
  static constexpr std::array<double, 5> nodes = {0.0, -0.5384693101056831, 0.5384693101056831,
                                                  -0.9061798459386640, 0.9061798459386640};
  static constexpr std::array<double, 5> weights = {0.5688888888888889, 0.4786286704993665,
                                                    0.4786286704993665, 0.2369268850561891,
                                                    0.2369268850561891};
  const Index n = traj.dim();
  const auto& dense = traj.dense();
  double total = 0.0;
  std::size_t i = traj.step_index(a);
  for (; i < dense.size(); ++i) {
    const double lo = std::max(a, dense[i].t0);
    const double hi = std::min(b, dense[i].t0 + dense[i].h);
    if (dense[i].t0 >= b) break;
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double acc = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const Matrix y = dense[i].eval(mid + half * nodes[q]);
      acc += weights[q] * symmetry_part(y.rightCols(n), traj.problem().symmetry).squaredNorm();
    }
    total += half * acc;
  }
  return total;
}

/// Cumulative int_0^{t_k} ||D||_2^2 on a sorted time grid.
inline std::vector<double> cumulative_hs_integral(const Trajectory& traj,
                                                  const std::vector<double>& times) {
  std::vector<double> out(times.size(), 0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    out[k] = out[k - 1] + hs_norm_squared_integral(traj, times[k - 1], times[k]);
  }
  return out;
}

}  // namespace eflow
