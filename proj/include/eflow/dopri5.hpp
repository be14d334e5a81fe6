#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair on matrix-valued states,
// with the standard 4th-order continuous extension and a PI step-size
// controller. Shared by the flow integrator and the linear evolution
// families.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "eflow/linalg.hpp"

namespace eflow::dopri5 {

namespace tableau {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace tableau

/// Result of one trial step from (t, y) with size h.
struct Trial {
  Matrix y_new;
  Matrix k7;  // f(t + h, y_new), reusable as k1 of the next step (FSAL)
  std::array<Matrix, 6> k;  // k1..k6
  double error = 0.0;       // scaled RMS error estimate; accept if <= 1
};

/// Scaled RMS norm of an error estimate against tolerances.
inline double error_norm(const Matrix& err, const Matrix& y0, const Matrix& y1, double rtol,
                         double atol) {
  if (err.size() == 0) return 0.0;
  double acc = 0.0;
  for (Index j = 0; j < err.cols(); ++j) {
    for (Index i = 0; i < err.rows(); ++i) {
      const double scale = atol + rtol * std::max(std::abs(y0(i, j)), std::abs(y1(i, j)));
      const double r = std::abs(err(i, j)) / scale;
      acc += r * r;
    }
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

template <class Rhs>
Trial attempt(Rhs&& f, double t, const Matrix& y, const Matrix& k1, double h, double rtol,
              double atol) {
  using namespace tableau;
  Trial out;
  out.k[0] = k1;
  out.k[1] = f(t + c2 * h, y + h * (a21 * k1));
  out.k[2] = f(t + c3 * h, y + h * (a31 * k1 + a32 * out.k[1]));
  out.k[3] = f(t + c4 * h, y + h * (a41 * k1 + a42 * out.k[1] + a43 * out.k[2]));
  out.k[4] = f(t + c5 * h, y + h * (a51 * k1 + a52 * out.k[1] + a53 * out.k[2] + a54 * out.k[3]));
  out.k[5] = f(t + h, y + h * (a61 * k1 + a62 * out.k[1] + a63 * out.k[2] + a64 * out.k[3] +
                               a65 * out.k[4]));
  out.y_new = y + h * (a71 * k1 + a73 * out.k[2] + a74 * out.k[3] + a75 * out.k[4] + a76 * out.k[5]);
  out.k7 = f(t + h, out.y_new);
  const Matrix err = h * (e1 * k1 + e3 * out.k[2] + e4 * out.k[3] + e5 * out.k[4] +
                          e6 * out.k[5] + e7 * out.k7);
  out.error = error_norm(err, y, out.y_new, rtol, atol);
  if (!std::isfinite(out.error) || !out.y_new.allFinite()) {
    out.error = std::numeric_limits<double>::infinity();
  }
  return out;
}

/// Continuous-extension coefficients of one accepted step. `y1` may differ
/// from the raw RK result (e.g. after structure projection); the interpolant
/// then ends exactly at the stored value.
struct DenseCoefficients {
  double t0 = 0.0;
  double h = 0.0;
  std::array<Matrix, 5> r;

  Matrix eval(double t) const {
    const double theta = h > 0.0 ? (t - t0) / h : 0.0;
    const double theta1 = 1.0 - theta;
    return r[0] + theta * (r[1] + theta1 * (r[2] + theta * (r[3] + theta1 * r[4])));
  }
};

inline DenseCoefficients make_dense(double t0, double h, const Matrix& y0, const Matrix& y1,
                                    const Trial& trial) {
  using namespace tableau;
  DenseCoefficients dc;
  dc.t0 = t0;
  dc.h = h;
  const Matrix dy = y1 - y0;
  const Matrix bspl = h * trial.k[0] - dy;
  dc.r[0] = y0;
  dc.r[1] = dy;
  dc.r[2] = bspl;
  dc.r[3] = dy - h * trial.k7 - bspl;
  dc.r[4] = h * (d1 * trial.k[0] + d3 * trial.k[2] + d4 * trial.k[3] + d5 * trial.k[4] +
                 d6 * trial.k[5] + d7 * trial.k7);
  return dc;
}

/// PI step-size controller (Hairer-Norsett-Wanner, DOPRI5 defaults).
class Controller {
 public:
  /// Proposed next step after a trial with scaled error `err`.
  double propose(double h, double err, bool accepted) {
    if (!std::isfinite(err)) return 0.1 * h;
    const double fac11 = std::pow(std::max(err, 1e-300), kExpo1);
    if (accepted) {
      double fac = fac11 / std::pow(err_old_, kBeta);
      fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
      err_old_ = std::max(err, 1e-4);
      return h / fac;
    }
    return h / std::min(1.0 / kFacMin, fac11 / kSafe);
  }

 private:
  static constexpr double kBeta = 0.04;
  static constexpr double kExpo1 = 0.2 - kBeta * 0.75;
  static constexpr double kSafe = 0.9;
  static constexpr double kFacMin = 0.2;
  static constexpr double kFacMax = 10.0;
  double err_old_ = 1e-4;
};

}  // namespace eflow::dopri5
