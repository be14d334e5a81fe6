#include <gtest/gtest.h>

#include <random>

#include "eflow/linalg.hpp"
#include "oracle.hpp"

using namespace eflow;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Matrix m = Matrix::Zero(static_cast<Index>(v.size()), static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) m(i, i) = x, ++i;
  return m;
}

}  // namespace

TEST(Transpose, IdentityAndOffDiagonal) {
  EXPECT_EQ(transpose(identity(3)), identity(3));
  Matrix m(2, 2);
  m << Complex(0, 0), Complex(0, 1), Complex(0, -1), Complex(0, 0);
  Matrix want(2, 2);
  want << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  EXPECT_EQ(transpose(m), want);
}

TEST(Transpose, AdjointIsConjugateTranspose) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix m = oracle::random_complex(rng, 5);
    EXPECT_EQ(adjoint(m), Matrix(transpose(m).conjugate()));
    EXPECT_EQ(transpose(transpose(m)), m);
  }
}

TEST(HermitianEigen, DiagonalAndPauli) {
  const EigenDecomposition e = hermitian_eigen(diag({3, 1, 2}));
  EXPECT_NEAR(e.values(0), 1, 1e-14);
  EXPECT_NEAR(e.values(1), 2, 1e-14);
  EXPECT_NEAR(e.values(2), 3, 1e-14);
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  const RealVector v = hermitian_eigenvalues(x);
  EXPECT_NEAR(v(0), -1, 1e-14);
  EXPECT_NEAR(v(1), 1, 1e-14);
}

TEST(HermitianEigen, ReconstructionAndPhaseConvention) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix h = oracle::random_hermitian(rng, 6);
    const EigenDecomposition e = hermitian_eigen(h);
    const Matrix rec = e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint();
    EXPECT_LT((rec - h).cwiseAbs().maxCoeff(), 1e-12);
    for (Index i = 1; i < e.values.size(); ++i) EXPECT_LE(e.values(i - 1), e.values(i));
    EXPECT_LT((e.values - oracle::eigvals(h)).cwiseAbs().maxCoeff(), 1e-12);
    for (Index j = 0; j < e.vectors.cols(); ++j) {
      const auto col = e.vectors.col(j);
      const double big = col.cwiseAbs().maxCoeff();
      Index k = 0;
      while (std::abs(col(k)) <= 1e-12 * big) ++k;
      EXPECT_GT(col(k).real(), 0.0);
      EXPECT_NEAR(col(k).imag(), 0.0, 1e-14);
    }
  }
}

TEST(HermitianEigen, RejectsNonHermitian) {
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  try {
    hermitian_eigen(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotHermitian);
  }
}

TEST(HermitianEigen, TransposePreservesSpectrum) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = oracle::random_complex(rng, 4);
    const Matrix psd = a * a.adjoint();
    EXPECT_NEAR(lambda_min(transpose(psd)), lambda_min(psd), 1e-12);
    EXPECT_GE(lambda_min(transpose(psd)), -1e-12);
  }
}

TEST(PsdSqrt, DiagonalAndIdentity) {
  EXPECT_LT((psd_sqrt(diag({4, 9})) - diag({2, 3})).norm(), 1e-14);
  EXPECT_LT((psd_sqrt(identity(3)) - identity(3)).norm(), 1e-14);
}

TEST(PsdSqrt, SquaresBackAndCommutes) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = oracle::random_complex(rng, 5);
    const Matrix m = a * a.adjoint();
    const Matrix r = psd_sqrt(m);
    EXPECT_LT((r * r - m).norm(), 1e-10 * std::max(1.0, m.norm()));
    EXPECT_LT((r * m - m * r).norm(), 1e-10 * std::max(1.0, m.norm()));
    EXPECT_GE(lambda_min(r), -1e-12);
  }
}

TEST(PsdSqrt, ClampsRoundoffAndRejectsIndefinite) {
  const Matrix tiny = diag({1, -1e-13});
  EXPECT_NO_THROW(psd_sqrt(tiny));
  EXPECT_NEAR(psd_sqrt(tiny)(1, 1).real(), 0.0, 0.0);
  try {
    psd_sqrt(diag({1, -0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotPSD);
  }
}

TEST(Norms, DiagonalAndZero) {
  const Matrix m = diag({1, -2});
  EXPECT_NEAR(norm(m, NormKind::Operator), 2, 1e-14);
  EXPECT_NEAR(norm(m, NormKind::HilbertSchmidt), std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(norm(m, NormKind::Trace), 3, 1e-14);
  const Matrix z = Matrix::Zero(3, 3);
  for (auto k : {NormKind::Operator, NormKind::HilbertSchmidt, NormKind::Trace}) EXPECT_EQ(norm(z, k), 0.0);
}

TEST(Norms, OrderingOnRandomMatrices) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int rep = 0; rep < 1000; ++rep) {
    const Matrix m = oracle::random_complex(rng, dim(rng));
    const double op = norm(m, NormKind::Operator), hs = norm(m, NormKind::HilbertSchmidt),
                 tr = norm(m, NormKind::Trace);
    EXPECT_LE(op, hs * (1 + 1e-12));
    EXPECT_LE(hs, tr * (1 + 1e-12));
  }
}

TEST(Structure, SymmetryPartProjects) {
  std::mt19937_64 rng(6);
  const Matrix a = oracle::random_complex(rng, 4);
  const Matrix s = symmetry_part(a, Symmetry::Symmetric);
  const Matrix k = symmetry_part(a, Symmetry::Antisymmetric);
  EXPECT_EQ((s.transpose() - s).norm(), 0.0);
  EXPECT_EQ((k.transpose() + k).norm(), 0.0);
  EXPECT_LT((s + k - a).norm(), 1e-14);
  EXPECT_TRUE(is_hermitian(hermitian_part(a)));
  EXPECT_FALSE(is_hermitian(a));
}
