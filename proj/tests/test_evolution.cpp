#include <gtest/gtest.h>

#include "eflow/evolution.hpp"
#include "eflow/scenarios.hpp"
#include "oracle.hpp"

using namespace eflow;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(EvolveW, IdentityAtEqualTimes) {
  const Scenario sc = generate(1, {}, 3);
  const Trajectory traj = integrate(sc.problem);
  EXPECT_EQ(evolve_W(traj, 0.5, 0.5).w, identity(3));
  EXPECT_EQ(evolve_V(traj, 0.5, 0.5).w, identity(3));
}

TEST(EvolveW, ConstantGeneratorIsMatrixExponential) {
  const FlowProblem p{diag2(1, 2), Matrix::Zero(2, 2), Symmetry::Symmetric, 0.5, 0.5, 0};
  const Trajectory traj = integrate(p);
  for (double t : {0.1, 1.0, 3.0}) {
    const Matrix w = evolve_W(traj, 0, t).w;
    EXPECT_LT((w - oracle::exp_herm(p.upsilon0, -2 * t)).norm(), 1e-9);
    EXPECT_LT((evolve_V(traj, 0, t).w - identity(2)).norm(), 1e-15);
  }
}

TEST(EvolveW, ConstantGeneratorRandomHermitian) {
  std::mt19937_64 rng(3);
  const Matrix ups = oracle::random_hermitian(rng, 4);
  const double lmin = oracle::eigvals(ups).minCoeff();
  const FlowProblem p{ups, Matrix::Zero(4, 4), Symmetry::Symmetric, 0.3 - lmin, 0.3, 0};
  const Trajectory traj = integrate(p);
  const Matrix w = evolve_W(traj, 0, 2.0).w;
  const Matrix ref = oracle::exp_herm(ups, -4.0);
  EXPECT_LT((w - ref).norm(), 1e-8 * (1 + ref.norm()));
}

TEST(EvolveW, TransportsPairing) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const RegimeSet tags = seed % 2 ? RegimeSet{Regime::FermionicAntisymmetric} : RegimeSet{};
    const Scenario sc = generate(seed, tags, 4);
    const Trajectory traj = integrate(sc.problem);
    const double d0 = sc.problem.d0.norm();
    for (double frac : {0.05, 0.2, 0.6, 1.0}) {
      const double t = frac * traj.t_end();
      const Matrix w = evolve_W(traj, 0, t).w;
      const Matrix pred = w * sc.problem.d0 * w.transpose();
      EXPECT_LE((dense_eval(traj, t).d - pred).norm(), 1e-6 * (1 + d0)) << sc.name << " t=" << t;
    }
  }
}

TEST(EvolveW, Cocycle) {
  const Scenario sc = generate(5, {}, 3);
  const Trajectory traj = integrate(sc.problem);
  const double r = 0.1 * traj.t_end(), s = 0.3 * traj.t_end(), t = 0.5 * traj.t_end();
  const Matrix lhs = evolve_W(traj, s, t).w * evolve_W(traj, r, s).w;
  const Matrix rhs = evolve_W(traj, r, t).w;
  EXPECT_LT((lhs - rhs).norm(), 1e-7 * (1 + rhs.norm()));
}

TEST(EvolveV, TransportsFrakD) {
  const Scenario sc = generate(9, {Regime::NonpositiveFrakD0Psd}, 4);
  const Trajectory traj = integrate(sc.problem);
  const FlowProblem& p = sc.problem;
  for (auto [fs, ft] : {std::pair{0.0, 0.1}, {0.05, 0.4}, {0.2, 1.0}}) {
    const double s = fs * traj.t_end(), t = ft * traj.t_end();
    const Matrix v = evolve_V(traj, s, t).w;
    const Matrix ds = frakD(dense_eval(traj, s), p);
    const Matrix dt = frakD(dense_eval(traj, t), p);
    EXPECT_LE((dt - v * ds * v.adjoint()).norm(), 1e-6 * (1 + ds.norm())) << s << " " << t;
  }
}

TEST(Evolve, RejectsBadInterval) {
  const Scenario sc = generate(2, {}, 2);
  const Trajectory traj = integrate(sc.problem);
  for (auto [s, t] : {std::pair{0.5, 0.2}, {-1.0, 0.5}, {0.0, traj.t_end() + 1}}) {
    try {
      evolve_W(traj, s, t);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::OutOfRange);
    }
  }
}
