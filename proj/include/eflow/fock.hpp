#pragma once

// Fermionic Fock space on n modes via Jordan-Wigner, the quadratic
// Hamiltonian
//
//   H_0 = sum_{k,l} U_{kl} a_k^* a_l + D_{kl} a_k^* a_l^* + conj(D_{kl}) a_l a_k + E_0,
//
// and a spectral comparison against the number-conserving Hamiltonian
// built from the flow's limit operator and energy shift.

#include <Eigen/Sparse>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "eflow/asymptotics.hpp"
#include "eflow/flow.hpp"
#include "eflow/linalg.hpp"

namespace eflow {

using SparseMatrix = Eigen::SparseMatrix<Complex>;

inline constexpr int kMaxModes = 12;

/// Annihilators a_0..a_{n-1} on C^{2^n}. Basis index bit k is the occupation
/// of mode k; a_k carries the sign string of modes 0..k-1.
inline std::vector<SparseMatrix> jordan_wigner(int n) {
  if (n < 1 || n > kMaxModes) {
    throw Error(Errc::TooManyModes, "mode count " + std::to_string(n) + " outside [1, " +
                                        std::to_string(kMaxModes) + "]");
  }
  const Index dim = Index{1} << n;
  std::vector<SparseMatrix> ops;
  ops.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(dim / 2));
    const std::uint32_t bit = 1u << k;
    const std::uint32_t lower = bit - 1u;
    for (std::uint32_t s = 0; s < static_cast<std::uint32_t>(dim); ++s) {
      if (!(s & bit)) continue;
      const double sign = (std::popcount(s & lower) % 2) ? -1.0 : 1.0;
      trip.emplace_back(static_cast<Index>(s & ~bit), static_cast<Index>(s), Complex(sign, 0.0));
    }
    SparseMatrix a(dim, dim);
    a.setFromTriplets(trip.begin(), trip.end());
    ops.push_back(std::move(a));
  }
  return ops;
}

inline double sparse_max_abs(const SparseMatrix& m) {
  double worst = 0.0;
  for (Index col = 0; col < m.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) worst = std::max(worst, std::abs(it.value()));
  return worst;
}

/// max over j,k of the CAR residuals {a_j, a_k} and {a_j, a_k^*} - delta_jk.
inline double car_residual(const std::vector<SparseMatrix>& ops) {
  double worst = 0.0;
  const Index dim = ops.front().rows();
  SparseMatrix eye(dim, dim);
  eye.setIdentity();
  for (std::size_t j = 0; j < ops.size(); ++j) {
    for (std::size_t k = 0; k < ops.size(); ++k) {
      const SparseMatrix ak_dag = ops[k].adjoint();
      SparseMatrix anti = ops[j] * ops[k] + ops[k] * ops[j];
      worst = std::max(worst, sparse_max_abs(anti));
      SparseMatrix mixed = ops[j] * ak_dag + ak_dag * ops[j];
      if (j == k) mixed -= eye;
      worst = std::max(worst, sparse_max_abs(mixed));
    }
  }
  return worst;
}

inline SparseMatrix number_operator(const std::vector<SparseMatrix>& ops) {
  SparseMatrix n(ops.front().rows(), ops.front().cols());
  for (const auto& a : ops) n += SparseMatrix(a.adjoint()) * a;
  return n;
}

struct FockModel {
  int modes = 0;
  std::vector<SparseMatrix> annihilators;
  SparseMatrix number_op;
  SparseMatrix h0;
};

inline SparseMatrix build_h0(const Matrix& upsilon, const Matrix& d, double e0,
                             const std::vector<SparseMatrix>& ops) {
  const auto n = static_cast<Index>(ops.size());
  if (upsilon.rows() != n || upsilon.cols() != n || d.rows() != n || d.cols() != n) {
    throw Error(Errc::DimensionMismatch, "one-particle matrices must be " + std::to_string(n) +
                                             "x" + std::to_string(n));
  }
  const double dn = d.norm();
  if (dn > 0.0 && (d.transpose() + d).norm() > 1e-10 * dn) {
    throw Error(Errc::NotAntisymmetric, "D0^T = -D0 violated");
  }
  const Index dim = ops.front().rows();
  std::vector<SparseMatrix> creators;
  creators.reserve(ops.size());
  for (const auto& a : ops) creators.emplace_back(a.adjoint());

  SparseMatrix h(dim, dim);
  for (Index k = 0; k < n; ++k) {
    for (Index l = 0; l < n; ++l) {
      const auto ku = static_cast<std::size_t>(k), lu = static_cast<std::size_t>(l);
      if (upsilon(k, l) != Complex(0.0)) h += upsilon(k, l) * (creators[ku] * ops[lu]);
      if (d(k, l) != Complex(0.0)) {
        h += d(k, l) * (creators[ku] * creators[lu]);
        h += std::conj(d(k, l)) * (ops[lu] * ops[ku]);
      }
    }
  }
  SparseMatrix eye(dim, dim);
  eye.setIdentity();
  h += e0 * eye;
  h.prune(Complex(0.0), 0.0);
  return h;
}

inline FockModel make_fock_model(const FlowProblem& p) {
  FockModel m;
  m.modes = static_cast<int>(p.dim());
  m.annihilators = jordan_wigner(m.modes);
  m.number_op = number_operator(m.annihilators);
  m.h0 = build_h0(p.upsilon0, p.d0, p.e0, m.annihilators);
  return m;
}

/// sum_{k,l} U_{kl} a_k^* a_l + e 1.
inline SparseMatrix second_quantize_diagonal(const Matrix& upsilon_inf, double e_inf,
                                             const std::vector<SparseMatrix>& ops) {
  const auto n = static_cast<Index>(ops.size());
  if (upsilon_inf.rows() != n || upsilon_inf.cols() != n) {
    throw Error(Errc::DimensionMismatch, "Upsilon_inf dimension differs from the mode count");
  }
  const Matrix zero = Matrix::Zero(n, n);
  return build_h0(upsilon_inf, zero, e_inf, ops);
}

/// Sorted spectrum of a Hermitian Fock-space operator commuting with the
/// parity (-1)^N; the even and odd sectors are diagonalized separately.
inline RealVector parity_block_spectrum(const SparseMatrix& h) {
  const Index dim = h.rows();
  std::vector<Index> position(static_cast<std::size_t>(dim));
  Index sizes[2] = {0, 0};
  for (Index s = 0; s < dim; ++s) {
    const int parity = std::popcount(static_cast<std::uint32_t>(s)) % 2;
    position[static_cast<std::size_t>(s)] = sizes[parity]++;
  }
  Matrix blocks[2] = {Matrix::Zero(sizes[0], sizes[0]), Matrix::Zero(sizes[1], sizes[1])};
  for (Index col = 0; col < h.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(h, col); it; ++it) {
      const auto r = static_cast<std::uint32_t>(it.row()), c = static_cast<std::uint32_t>(it.col());
      const int pr = std::popcount(r) % 2, pc = std::popcount(c) % 2;
      if (pr != pc) {
        if (std::abs(it.value()) > 0.0) throw Error(Errc::DimensionMismatch, "operator mixes parity sectors");
        continue;
      }
      blocks[pr](position[r], position[c]) += it.value();
    }
  }
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(dim));
  for (const auto& block : blocks) {
    if (block.size() == 0) continue;
    const RealVector ev = hermitian_eigenvalues(block);
    all.insert(all.end(), ev.data(), ev.data() + ev.size());
  }
  std::sort(all.begin(), all.end());
  return Eigen::Map<RealVector>(all.data(), static_cast<Index>(all.size()));
}

struct SpectralComparison {
  RealVector spec_h0;
  RealVector spec_diag;
  double max_abs_gap = 0.0;
  double n_commutator_norm = 0.0;
  double ground_state_energy = 0.0;  // min spec_h0
  double predicted_ground = 0.0;     // E_0 - energy_shift
};

inline SpectralComparison validate(const FlowProblem& problem, const AsymptoticsResult& asym,
                                   const std::vector<SparseMatrix>& ops) {
  if (problem.dim() != static_cast<Index>(ops.size()) ||
      asym.upsilon_inf.rows() != problem.dim()) {
    throw Error(Errc::DimensionMismatch, "problem, limit operator and mode count disagree");
  }
  const SparseMatrix h0 = build_h0(problem.upsilon0, problem.d0, problem.e0, ops);
  const double e_inf = problem.e0 - asym.energy_shift;
  const SparseMatrix hd = second_quantize_diagonal(hermitian_part(asym.upsilon_inf), e_inf, ops);
  const SparseMatrix num = number_operator(ops);

  SpectralComparison out;
  out.spec_h0 = parity_block_spectrum(h0);
  out.spec_diag = parity_block_spectrum(hd);
  out.max_abs_gap = (out.spec_h0 - out.spec_diag).cwiseAbs().maxCoeff();
  const SparseMatrix comm = h0 * num - num * h0;
  out.n_commutator_norm = comm.norm();
  out.ground_state_energy = out.spec_h0.minCoeff();
  out.predicted_ground = e_inf;
  return out;
}

}  // namespace eflow
