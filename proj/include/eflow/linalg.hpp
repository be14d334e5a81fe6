#pragma once

// Dense complex matrix helpers. Complex conjugation is entrywise in the
// canonical basis, so transpose() is the ordinary transpose and
// adjoint() == conj(transpose()).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

#include "eflow/error.hpp"

namespace eflow {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Symmetry class of D: D^T = sign * D.
enum class Symmetry : int { Symmetric = 1, Antisymmetric = -1 };

constexpr double sign_of(Symmetry s) { return static_cast<double>(static_cast<int>(s)); }

enum class NormKind { Operator, HilbertSchmidt, Trace };

inline Matrix transpose(const Matrix& m) { return m.transpose(); }
inline Matrix adjoint(const Matrix& m) { return m.adjoint(); }
inline Matrix identity(Index n) { return Matrix::Identity(n, n); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

/// Orthogonal projection onto {X : X^T = sign X}.
inline Matrix symmetry_part(const Matrix& m, Symmetry s) {
  return 0.5 * (m + sign_of(s) * m.transpose());
}

inline RealVector singular_values(const Matrix& m) {
  if (m.size() == 0) return RealVector();
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

inline double norm(const Matrix& m, NormKind kind) {
  switch (kind) {
    case NormKind::HilbertSchmidt:
      return m.norm();
    case NormKind::Operator: {
      const RealVector sv = singular_values(m);
      return sv.size() ? sv.maxCoeff() : 0.0;
    }
    case NormKind::Trace:
      return singular_values(m).sum();
  }
  return 0.0;
}

inline double hs_norm(const Matrix& m) { return m.norm(); }
inline double op_norm(const Matrix& m) { return norm(m, NormKind::Operator); }

/// Relative anti-Hermitian defect ||M - M*||_2 / ||M||_2 (0 for M = 0).
inline double hermitian_defect(const Matrix& m) {
  const double scale = m.norm();
  if (scale == 0.0) return 0.0;
  return (m - m.adjoint()).norm() / scale;
}

inline bool is_hermitian(const Matrix& m, double tol = 1e-10) {
  return hermitian_defect(m) <= tol;
}

struct EigenDecomposition {
  RealVector values;  // ascending
  Matrix vectors;     // columns, unitary
};

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are ascending and
/// each eigenvector is rotated so its first non-negligible component is real
/// and positive, which makes the output reproducible.
inline EigenDecomposition hermitian_eigen(const Matrix& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) throw Error(Errc::DimensionMismatch, "hermitian_eigen needs a square matrix");
  if (!is_hermitian(m, tol)) throw Error(Errc::NotHermitian, "||M - M*|| exceeds tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(m));
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  for (Index j = 0; j < out.vectors.cols(); ++j) {
    auto col = out.vectors.col(j);
    const double cutoff = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > cutoff) {
        col *= std::conj(col(i)) / std::abs(col(i));
        col(i) = Complex(col(i).real(), 0.0);
        break;
      }
    }
  }
  return out;
}

/// Eigenvalues only (ascending); the input is symmetrized first.
inline RealVector hermitian_eigenvalues(const Matrix& m) {
  if (m.size() == 0) return RealVector();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline double lambda_min(const Matrix& m) { return hermitian_eigenvalues(m).minCoeff(); }
inline double lambda_max(const Matrix& m) { return hermitian_eigenvalues(m).maxCoeff(); }

/// Hermitian PSD square root. Eigenvalues in [-tol*scale, 0) are clamped to
/// zero, with scale = max(1, ||M||_op).
inline Matrix psd_sqrt(const Matrix& m, double tol = 1e-10) {
  const EigenDecomposition eig = hermitian_eigen(m, tol);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values.size() && eig.values.minCoeff() < -tol * scale) {
    throw Error(Errc::NotPSD, "lambda_min = " + std::to_string(eig.values.minCoeff()));
  }
  const RealVector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return hermitian_part(eig.vectors * roots.cast<Complex>().asDiagonal() * eig.vectors.adjoint());
}

/// f(M) for Hermitian M via its spectral decomposition.
template <class F>
Matrix hermitian_function(const Matrix& m, F&& f) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(m));
  RealVector vals = solver.eigenvalues();
  for (Index i = 0; i < vals.size(); ++i) vals(i) = f(vals(i));
  return solver.eigenvectors() * vals.cast<Complex>().asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace eflow
