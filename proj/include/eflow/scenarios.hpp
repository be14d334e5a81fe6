#pragma once

// Deterministic instance generators covering the hypothesis regimes of the
// flow's convergence and conservation results.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "eflow/asymptotics.hpp"
#include "eflow/flow.hpp"
#include "eflow/frak.hpp"
#include "eflow/invariants.hpp"
#include "eflow/linalg.hpp"

namespace eflow {

enum class Regime {
  Bounded,
  GapPositive,
  NonpositiveFrakD0Psd,
  Commuting,
  Scalar,
  FermionicAntisymmetric,
  TrivialD0,
};

using RegimeSet = std::set<Regime>;

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::Bounded: return "bounded";
    case Regime::GapPositive: return "gap_positive";
    case Regime::NonpositiveFrakD0Psd: return "nonpositive_frakD0_psd";
    case Regime::Commuting: return "commuting";
    case Regime::Scalar: return "scalar";
    case Regime::FermionicAntisymmetric: return "fermionic_antisymmetric";
    case Regime::TrivialD0: return "trivial_D0";
  }
  return "bounded";
}

inline Regime regime_from_string(const std::string& s) {
  for (Regime r : {Regime::Bounded, Regime::GapPositive, Regime::NonpositiveFrakD0Psd,
                   Regime::Commuting, Regime::Scalar, Regime::FermionicAntisymmetric,
                   Regime::TrivialD0}) {
    if (to_string(r) == s) return r;
  }
  throw Error(Errc::InconsistentRegime, "unknown regime tag '" + s + "'");
}

struct Scenario {
  std::string name;
  FlowProblem problem;
  RegimeSet regime_tags;
  nlohmann::json expected = nlohmann::json::object();

  bool has(Regime r) const { return regime_tags.count(r) > 0; }
};

namespace detail {

class ScenarioRng {
 public:
  ScenarioRng(std::uint64_t seed, int dim, unsigned mask) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(dim), mask};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  Complex complex_normal() { return Complex(normal(), normal()) / std::sqrt(2.0); }

  Matrix complex_gaussian(Index n) {
    Matrix a(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) a(i, j) = complex_normal();
    return a;
  }

  Eigen::MatrixXd real_orthogonal(Index n) {
    Eigen::MatrixXd g(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) g(i, j) = normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR();
    for (Index i = 0; i < n; ++i)
      if (r(i, i) < 0) q.col(i) *= -1.0;
    return q;
  }

  Complex phase() { return std::polar(1.0, uniform(0.0, 2.0 * std::numbers::pi)); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

inline unsigned regime_mask(const RegimeSet& tags) {
  unsigned m = 0;
  for (Regime r : tags) m |= 1u << static_cast<unsigned>(r);
  return m;
}

inline std::string scenario_name(const RegimeSet& tags, std::uint64_t seed, int dim) {
  std::string name;
  for (Regime r : tags) {
    if (r == Regime::Bounded) continue;
    name += to_string(r) + "+";
  }
  if (name.empty()) name = "bounded+";
  name.pop_back();
  return name + "-s" + std::to_string(seed) + "-n" + std::to_string(dim);
}

/// Largest mu <= the natural one keeping |mu| away from the singular value 0.
inline void keep_mu_off_zero(FlowProblem& p) {
  if (std::abs(p.mu) < 0.05) {
    p.mu += 0.1;
    p.epsilon += 0.1;
  }
}

}  // namespace detail

/// Deterministic scenario for (seed, regime tags, dim).
inline Scenario generate(std::uint64_t seed, RegimeSet regime, int dim) {
  if (dim < 1) throw Error(Errc::InconsistentRegime, "dim must be >= 1");
  const bool scalar = regime.count(Regime::Scalar);
  const bool gap = regime.count(Regime::GapPositive);
  const bool nonpos = regime.count(Regime::NonpositiveFrakD0Psd);
  const bool commuting = regime.count(Regime::Commuting);
  const bool fermionic = regime.count(Regime::FermionicAntisymmetric);
  const bool trivial = regime.count(Regime::TrivialD0);

  if (scalar && dim != 1) throw Error(Errc::InconsistentRegime, "scalar requires dim = 1");
  if (gap && nonpos) throw Error(Errc::InconsistentRegime, "gap_positive excludes nonpositive_frakD0_psd");
  if (trivial && nonpos) throw Error(Errc::InconsistentRegime, "trivial_D0 excludes nonpositive_frakD0_psd");
  if (fermionic && dim == 1 && !trivial) {
    throw Error(Errc::InconsistentRegime, "a nonzero antisymmetric D0 needs dim >= 2");
  }
  if (fermionic && commuting && dim % 2 == 1 && !trivial) {
    throw Error(Errc::InconsistentRegime, "commuting antisymmetric data needs even dim");
  }

  regime.insert(Regime::Bounded);
  if (dim == 1) regime.insert(Regime::Commuting);
  detail::ScenarioRng rng(seed, dim, detail::regime_mask(regime));
  const Index n = dim;

  Scenario sc;
  sc.regime_tags = regime;
  sc.name = detail::scenario_name(regime, seed, dim);
  FlowProblem& p = sc.problem;
  p.symmetry = fermionic ? Symmetry::Antisymmetric : Symmetry::Symmetric;

  if (scalar) {
    double alpha = 0.99, beta = 0.07;
    if (seed != 0) {
      alpha = gap ? rng.uniform(-1.5, -0.5) : rng.uniform(-1.0, 1.0);
      beta = rng.uniform(0.01, 0.3);
    }
    if (trivial) beta = 0.0;
    p.upsilon0 = Matrix::Constant(1, 1, Complex(-alpha, 0.0));
    p.d0 = Matrix::Constant(1, 1, Complex(0.0, beta));
    if (gap) {
      p.mu = -alpha / 2.0;
      p.epsilon = -alpha;
    } else {
      p.mu = alpha + 0.01;
      p.epsilon = 0.01;
    }
    sc.expected = {{"alpha", alpha}, {"beta", beta}, {"c", ScalarFlow{alpha, beta}.c()}};
    validate(p);
    return sc;
  }

  double gap_alpha = rng.uniform(0.5, 1.5);
  if (commuting) {
    const Eigen::MatrixXd o = rng.real_orthogonal(n);
    const Matrix oc = o.cast<Complex>();
    RealVector a(n);
    Matrix core = Matrix::Zero(n, n);
    for (Index k = 0; k < n; ++k) a(k) = gap ? gap_alpha + rng.uniform(0.0, 3.0) : rng.uniform(-1.0, 2.0);
    if (fermionic) {
      for (Index k = 0; k + 1 < n; k += 2) {
        a(k + 1) = a(k);
        const Complex w = rng.uniform(0.1, 0.6) * rng.phase();
        core(k, k + 1) = w;
        core(k + 1, k) = -w;
      }
    } else {
      for (Index k = 0; k < n; ++k) core(k, k) = rng.uniform(0.1, 0.6) * rng.phase();
    }
    if (gap) a(0) = gap_alpha;
    if (gap && fermionic && n > 1) a(1) = gap_alpha;
    p.upsilon0 = hermitian_part(oc * a.cast<Complex>().asDiagonal() * oc.transpose());
    p.d0 = symmetry_part(oc * core * oc.transpose(), p.symmetry);
  } else {
    const Matrix g = hermitian_part(rng.complex_gaussian(n));
    const RealVector ev = hermitian_eigenvalues(g);
    if (gap) {
      // Spectrum in [alpha, alpha + 3] with lambda_min = alpha.
      const double span = std::max(ev.maxCoeff() - ev.minCoeff(), 1e-12);
      p.upsilon0 = hermitian_part((g - ev.minCoeff() * identity(n)) * (3.0 / span) + gap_alpha * identity(n));
    } else {
      const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-12);
      p.upsilon0 = hermitian_part(g * (1.5 / scale) + 0.5 * identity(n));
    }
    const Matrix a = rng.complex_gaussian(n);
    Matrix d = symmetry_part(a, p.symmetry);
    const double target = rng.uniform(0.2, 0.8);
    p.d0 = d * (target / std::max(op_norm(d), 1e-12));
  }
  if (trivial) p.d0 = Matrix::Zero(n, n);

  if (gap) {
    p.mu = gap_alpha / 2.0;
    p.epsilon = gap_alpha;
  } else if (nonpos) {
    // Some negative spectrum, compensated by a large enough D0.
    const double lmin = lambda_min(p.upsilon0);
    const double shift = -rng.uniform(0.2, 0.5) - lmin;
    p.upsilon0 = hermitian_part(p.upsilon0 + shift * identity(n));
    std::optional<MuChoice> choice;
    for (int attempt = 0; attempt < 40 && !choice; ++attempt) {
      choice = max_mu_with_psd_frakD0(p.upsilon0, p.d0, p.symmetry, /*positive_only=*/true);
      if (!choice) p.d0 *= 1.25;
    }
    if (!choice) throw Error(Errc::InconsistentRegime, "could not reach frakD0 >= 0 with mu > 0");
    p.mu = choice->mu;
    p.epsilon = choice->epsilon;
  } else {
    const double lmin = lambda_min(p.upsilon0);
    p.epsilon = 0.2;
    p.mu = p.epsilon - lmin;
    detail::keep_mu_off_zero(p);
  }

  if (commuting && !trivial) sc.expected["upsilon_inf_closed_form"] = true;
  if (trivial) sc.expected["constant"] = true;
  validate(p);
  if (nonpos && lambda_min(frakD0(p)) < -1e-10) {
    throw Error(Errc::InconsistentRegime, "frakD0 >= 0 not met");
  }
  return sc;
}

/// Instances outside the frakD_0 >= 0 regime, exercising non-asserting paths.
inline std::vector<Scenario> negative_cases(std::uint64_t seed) {
  detail::ScenarioRng rng(seed, 0, 0xffu);
  std::vector<Scenario> out;

  {
    // Upsilon_0 = -0.5 with tiny beta: frakD_0 < 0 at mu = 0.6.
    Scenario sc;
    sc.name = "negative-scalar-s" + std::to_string(seed);
    sc.regime_tags = {Regime::Bounded, Regime::Scalar, Regime::Commuting};
    const double beta = rng.uniform(1e-4, 1e-3);
    sc.problem = FlowProblem{Matrix::Constant(1, 1, Complex(-0.5, 0.0)),
                             Matrix::Constant(1, 1, Complex(0.0, beta)), Symmetry::Symmetric, 0.6,
                             0.1, 0.0};
    sc.expected = {{"alpha", 0.5}, {"beta", beta}, {"c", ScalarFlow{0.5, beta}.c()}};
    out.push_back(std::move(sc));
  }
  {
    // Negative eigenvector of Upsilon_0 inside ker D_0: the flow is constant there.
    Scenario sc;
    sc.name = "negative-kernel-s" + std::to_string(seed);
    sc.regime_tags = {Regime::Bounded, Regime::Commuting};
    Matrix u = Matrix::Zero(2, 2), d = Matrix::Zero(2, 2);
    u(0, 0) = -0.5;
    u(1, 1) = rng.uniform(0.8, 1.2);
    d(1, 1) = rng.uniform(0.2, 0.4) * rng.phase();
    sc.problem = FlowProblem{u, d, Symmetry::Symmetric, 0.6, 0.1, 0.0};
    sc.expected = {{"constant_subspace", 0}};
    out.push_back(std::move(sc));
  }
  {
    Scenario sc = generate(seed, {Regime::TrivialD0}, 3);
    sc.name = "negative-trivial-s" + std::to_string(seed);
    out.push_back(std::move(sc));
  }
  for (const auto& sc : out) validate(sc.problem);
  return out;
}

}  // namespace eflow
