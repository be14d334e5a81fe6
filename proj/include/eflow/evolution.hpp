#pragma once

// Linear evolution families driven by a computed trajectory:
//
//   d/dt W_{t,s} = -2 Upsilon_t W_{t,s},   W_{s,s} = 1     (transports D and K)
//   d/dt V_{t,s} = -8 B_t V_{t,s},         V_{s,s} = 1     (transports frakD)
//
// Both are integrated with Dormand-Prince 5(4), with step boundaries aligned
// to the trajectory's knots so each stage sees a single smooth interpolant.

#include <algorithm>
#include <string>

#include "eflow/dopri5.hpp"
#include "eflow/flow.hpp"
#include "eflow/frak.hpp"

namespace eflow {

struct EvolutionOperator {
  double s = 0.0;
  double t = 0.0;
  Matrix w;
};

namespace detail {

template <class Generator>
Matrix evolve_linear(const Trajectory& traj, double s, double t, const IntegratorConfig& cfg_in,
                     Generator&& generator) {
  if (!(s >= 0.0) || s > t || t > traj.t_end()) {
    throw Error(Errc::OutOfRange, "need 0 <= s <= t <= t_end, got s = " + std::to_string(s) +
                                      ", t = " + std::to_string(t));
  }
  const Index n = traj.dim();
  Matrix w = identity(n);
  if (t == s) return w;
  const IntegratorConfig cfg = resolve(cfg_in, traj.problem());

  auto f = [&](double tau, const Matrix& y) -> Matrix { return generator(tau) * y; };

  const auto& states = traj.states();
  std::size_t knot = traj.step_index(s) + 1;
  double tau = s;
  double h = std::min(cfg.h_init, t - s);
  Matrix k1 = f(tau, w);
  dopri5::Controller controller;
  int consecutive_rejects = 0;

  while (tau < t) {
    while (knot < states.size() && states[knot].t <= tau) ++knot;
    const double next_break = knot < states.size() ? std::min(states[knot].t, t) : t;
    bool clipped = false;
    if (tau + h >= next_break) {
      h = next_break - tau;
      clipped = true;
    }
    if (h < 1e-14 * std::max(1.0, t)) {
      throw Error(Errc::StepSizeUnderflow, "evolution step underflow at t = " + std::to_string(tau));
    }
    dopri5::Trial trial = dopri5::attempt(f, tau, w, k1, h, cfg.rtol, cfg.atol);
    if (!(trial.error <= 1.0)) {
      if (++consecutive_rejects > 200) {
        throw Error(Errc::ToleranceUnreachable, "evolution family: too many rejected steps");
      }
      h = controller.propose(h, trial.error, false);
      continue;
    }
    consecutive_rejects = 0;
    const double h_next = controller.propose(h, trial.error, true);
    tau = clipped ? next_break : tau + h;
    w = std::move(trial.y_new);
    // The generator may jump in its derivative at a knot; restart FSAL there.
    k1 = clipped ? f(tau, w) : std::move(trial.k7);
    h = h_next;
  }
  return w;
}

}  // namespace detail

/// W_{t,s} generated by -2 Upsilon_t.
inline EvolutionOperator evolve_W(const Trajectory& traj, double s, double t,
                                  const IntegratorConfig& cfg = {}) {
  const FlowProblem& p = traj.problem();
  auto gen = [&](double tau) -> Matrix {
    return -2.0 * (p.upsilon0 + dense_eval(traj, std::clamp(tau, 0.0, traj.t_end())).delta);
  };
  return EvolutionOperator{s, t, detail::evolve_linear(traj, s, t, cfg, gen)};
}

/// V_{t,s} generated by -8 B_t.
inline EvolutionOperator evolve_V(const Trajectory& traj, double s, double t,
                                  const IntegratorConfig& cfg = {}) {
  const FlowProblem& p = traj.problem();
  auto gen = [&](double tau) -> Matrix {
    return -8.0 * frakB(dense_eval(traj, std::clamp(tau, 0.0, traj.t_end())), p);
  };
  return EvolutionOperator{s, t, detail::evolve_linear(traj, s, t, cfg, gen)};
}

}  // namespace eflow
