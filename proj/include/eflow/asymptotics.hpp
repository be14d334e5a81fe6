#pragma once

// Infinite-time limits of the flow: the limit operator Upsilon_inf, the
// energy shift 8 int_0^inf ||D||_2^2, the exponential decay rate of ||D_t||_2,
// the closed form for commuting data, and the scalar closed-form solution.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eflow/flow.hpp"
#include "eflow/frak.hpp"
#include "eflow/invariants.hpp"
#include "eflow/linalg.hpp"

namespace eflow {

struct DecayFit {
  double rate = 0.0;            // r in ||D_t||_2 ~ C e^{-r t}
  double log_prefactor = 0.0;   // log C
  double rms_residual = 0.0;    // RMS of log-residuals in the window
  std::size_t samples_used = 0;
};

/// Least-squares fit of log ||D_t||_2 over the trailing `window_fraction` of
/// the sample grid.
inline DecayFit fit_decay_rate(const Trajectory& traj, double window_fraction = 0.3) {
  const std::vector<double> times = sample_times(traj);
  const auto window = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(times.size())));
  if (window < 20 || window > times.size()) {
    throw Error(Errc::InsufficientSamples, "need at least 20 samples in the fit window, have " +
                                               std::to_string(window));
  }
  std::vector<double> xs, ys;
  for (std::size_t i = times.size() - window; i < times.size(); ++i) {
    const double nrm = dense_eval(traj, times[i]).d.norm();
    if (!(nrm > 0.0)) continue;
    xs.push_back(times[i]);
    ys.push_back(std::log(nrm));
  }
  if (xs.size() < 20) throw Error(Errc::NonDecaying, "||D_t||_2 vanishes identically");
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sx += xs[i], sy += ys[i];
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  if (!(slope < 0.0)) throw Error(Errc::NonDecaying, "fitted slope " + std::to_string(slope) + " >= 0");
  DecayFit fit;
  fit.rate = -slope;
  fit.log_prefactor = my - slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.log_prefactor + slope * xs[i]);
    rss += r * r;
  }
  fit.rms_residual = std::sqrt(rss / m);
  fit.samples_used = xs.size();
  return fit;
}

struct GapCheck {
  bool asserted = false;  // hypotheses for a gap >= |mu| hold
  double claimed = 0.0;   // |mu|
  double observed = 0.0;  // lambda_min(Upsilon_inf)
};

struct AsymptoticsResult {
  Matrix upsilon_inf;
  Matrix delta_inf;
  double energy_shift = 0.0;  // 8 int_0^t_end ||D||_2^2 by quadrature
  double fitted_rate = 0.0;   // 0 when no fit was possible (constant flow)
  double tail_bound = 0.0;    // 16 C^2 e^{-2 r t_end} / (2 r)
  double energy_identity_residual = 0.0;  // |energy_shift - tr(Delta_inf)/2|
  GapCheck gap_check;
};

/// Whether the gap hypotheses hold: mu < 0, or mu != 0 with frakD_0 >= 0.
inline bool gap_hypotheses_hold(const FlowProblem& p) {
  if (p.mu < 0.0) return true;
  if (p.mu == 0.0) return false;
  return lambda_min(frakD0(p)) >= -1e-10;
}

inline AsymptoticsResult limit_operator(const Trajectory& traj) {
  if (!traj.stats().reached_stop) {
    throw Error(Errc::NotConverged, "||D_t||_2 did not fall below stop_tol within t_max = " +
                                        std::to_string(traj.config().t_max));
  }
  const FlowProblem& p = traj.problem();
  AsymptoticsResult out;
  out.delta_inf = traj.final_state().delta;
  out.upsilon_inf = p.upsilon0 + out.delta_inf;
  out.energy_shift = 8.0 * hs_norm_squared_integral(traj, 0.0, traj.t_end());
  out.energy_identity_residual = std::abs(out.energy_shift - 0.5 * out.delta_inf.trace().real());

  if (!p.is_constant()) {
    try {
      const DecayFit fit = fit_decay_rate(traj);
      out.fitted_rate = fit.rate;
      const double d_end = traj.final_state().d.norm();
      out.tail_bound = 16.0 * d_end * d_end / (2.0 * fit.rate);
    } catch (const Error&) {
      // No usable fit: the tail cannot be bounded.
      out.fitted_rate = 0.0;
      out.tail_bound = std::numeric_limits<double>::infinity();
    }
  }

  out.gap_check.asserted = gap_hypotheses_hold(p);
  out.gap_check.claimed = std::abs(p.mu);
  out.gap_check.observed = lambda_min(out.upsilon_inf);
  return out;
}

/// sqrt(Upsilon_0^2 + 4 D_0 D_0^*) for data with Upsilon_0 D_0 = D_0 Upsilon_0^T.
inline Matrix commutative_closed_form(const FlowProblem& p) {
  if (!is_commuting(p)) throw Error(Errc::NotCommutingInitialData, "Upsilon0 D0 != D0 Upsilon0^T");
  return psd_sqrt(hermitian_part(p.upsilon0 * p.upsilon0 + 4.0 * p.d0 * p.d0.adjoint()));
}

/// Scalar flow with Upsilon_0 = -alpha, D_0 = i beta.
struct ScalarFlow {
  double alpha = 0.0;
  double beta = 1.0;

  double c() const { return std::sqrt(alpha * alpha + 4.0 * beta * beta); }
};

struct ScalarValue {
  double f = 0.0;            // Delta_t
  double g_magnitude = 0.0;  // |D_t|
};

/// Closed-form solution of f' = 16|g|^2, g' = 4(alpha - f) g, f(0) = 0, g(0) = i beta.
inline ScalarValue scalar_closed_form(const ScalarFlow& s, double t) {
  if (t < 0.0) throw Error(Errc::OutOfRange, "t must be nonnegative");
  const double c = s.c();
  if (s.beta == 0.0 || c == 0.0) {
    throw Error(Errc::DegenerateDenominator, "beta = 0 gives a constant flow");
  }
  const double e = std::exp(-8.0 * c * t);
  const double num = (c + s.alpha) * (1.0 - e) - 2.0 * s.alpha;
  const double den = (c + s.alpha) * (1.0 + e) - 2.0 * s.alpha;
  if (std::abs(den) < 1e-300) throw Error(Errc::DegenerateDenominator, "denominator vanishes");
  const double ratio = num / den;
  return ScalarValue{s.alpha + c * ratio, 0.5 * c * std::sqrt(std::max(0.0, 1.0 - ratio * ratio))};
}

struct MuChoice {
  double mu = 0.0;
  double epsilon = 0.0;
};

/// Largest mu on a grid (step 1e-3 * spectral span of Upsilon_0) with
/// frakD_0 >= 0 and Upsilon_0 >= -(mu - epsilon) for some epsilon > 0.
/// Returns the chosen mu together with epsilon = mu + lambda_min(Upsilon_0).
inline std::optional<MuChoice> max_mu_with_psd_frakD0(const Matrix& upsilon0, const Matrix& d0,
                                                      Symmetry sym = Symmetry::Symmetric,
                                                      bool positive_only = false) {
  const RealVector ev = hermitian_eigenvalues(upsilon0);
  const double lmin = ev.minCoeff(), lmax = ev.maxCoeff();
  const double d_op = op_norm(d0);
  // frakD_0 <= lmax - mu + 4 |D|^2 / (mu + lmin): scan down from where this is < 0.
  double hi = std::max(lmax, -lmin) + 2.0 * d_op + 1.0;
  while (lmax - hi + 4.0 * d_op * d_op / (hi + lmin) >= 0.0) hi *= 2.0;
  double step = 1e-3 * (lmax - lmin);
  if (!(step > 0.0)) step = 1e-3 * std::max({std::abs(lmin), d_op, 1.0});
  step = std::max(step, 1e-5 * (hi + lmin));
  double lo = -lmin + step;
  if (positive_only) lo = std::max(lo, step);

  std::optional<MuChoice> best;
  FlowProblem probe{upsilon0, d0, sym, 0.0, 0.0, 0.0};
  for (double mu = hi; mu >= lo; mu -= step) {
    if (std::abs(mu) < 0.5 * step) continue;
    probe.mu = mu;
    probe.epsilon = mu + lmin;
    if (lambda_min(frakD0(probe)) >= 0.0) {
      best = MuChoice{mu, mu + lmin};
      break;
    }
  }
  return best;
}

}  // namespace eflow
