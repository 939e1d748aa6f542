#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "laser/error.hpp"
#include "laser/linalg.hpp"

using namespace laser;
using namespace laser::linalg;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index r = 0; r < e.rows(); ++r)
    for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
  return m;
}

Matrix unit(std::size_t d, std::size_t i) {
  Matrix e(d, 1);
  e(i, 0) = 1.0;
  return e;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected laser::Error";
  return ErrorKind::Io;
}

// Energy kept by projecting the rows of x onto span(q).
double projected_energy(const Matrix& x, const Matrix& q) { return frobenius_norm_sq(matmul(x, q)); }

}  // namespace

TEST(FrobeniusNorm, ZeroMatrix) { EXPECT_EQ(frobenius_norm(Matrix(2, 2)), 0.0); }

TEST(FrobeniusNorm, ThreeFourFive) { EXPECT_DOUBLE_EQ(frobenius_norm(Matrix(1, 2, {3.0, 4.0})), 5.0); }

TEST(FrobeniusNorm, MatchesBruteForceSum) {
  std::mt19937_64 rng(1);
  const Matrix x = random_gaussian(8, 8, rng);
  double sum = 0.0;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) sum += x(r, c) * x(r, c);
  EXPECT_NEAR(frobenius_norm(x), std::sqrt(sum), 1e-12);
}

TEST(Orthonormalize, AlreadyOrthonormalUnchanged) {
  const Matrix m = Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}});
  const Matrix q = orthonormalize(m);
  EXPECT_EQ(q, m);
}

TEST(Orthonormalize, DuplicateDirectionCollapses) {
  const Matrix m = Matrix::from_rows({{2, 3}, {0, 0}, {0, 0}});
  const Matrix q = orthonormalize(m);
  ASSERT_EQ(q.cols(), 1u);
  EXPECT_NEAR(q(0, 0), 1.0, 1e-15);
}

TEST(Orthonormalize, RandomSpanPreserved) {
  std::mt19937_64 rng(2);
  const Matrix m = random_gaussian(16, 5, rng);
  const Matrix q = orthonormalize(m);
  ASSERT_EQ(q.cols(), 5u);
  EXPECT_LT(orthonormality_error(q), 1e-8);
  // Independent basis for span(M) from Eigen's Householder QR.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(to_eigen(m));
  const Matrix ref = from_eigen(qr.householderQ() * Eigen::MatrixXd::Identity(16, 5));
  for (double angle : principal_angles(ref, q)) EXPECT_LT(angle, 1e-8);
}

TEST(Orthonormalize, AllZeroThrows) {
  EXPECT_EQ(kind_of([] { orthonormalize(Matrix(4, 3)); }), ErrorKind::AllColumnsDegenerate);
}

TEST(Orthonormalize, PropertyGramIsIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dims(1, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = dims(rng);
    const std::size_t r = 1 + static_cast<std::size_t>(dims(rng)) % (d + 3);
    Matrix m = random_gaussian(d, r, rng);
    // Occasionally scale one column down by many orders of magnitude.
    if (trial % 7 == 0) {
      for (std::size_t i = 0; i < d; ++i) m(i, 0) *= 1e-7;
    }
    const Matrix q = orthonormalize(m);
    EXPECT_LE(q.cols(), std::min(d, r));
    EXPECT_LT(orthonormality_error(q), 1e-8);
  }
}

TEST(SymmetricEigen, MatchesEigenSelfAdjointSolver) {
  std::mt19937_64 rng(4);
  for (std::size_t n : {1u, 2u, 3u, 7u, 31u, 64u}) {
    const Matrix a = random_gaussian(n + 5, n, rng);
    const Matrix s = gram(a);
    const SymmetricEigen eig = symmetric_eigen(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(s));
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(eig.values[i], ref.eigenvalues()(n - 1 - i), 1e-9 * (1.0 + std::abs(eig.values[i])));
    }
    // S v = lambda v
    const Matrix sv = matmul(s, eig.vectors);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r = 0; r < n; ++r) EXPECT_NEAR(sv(r, c), eig.values[c] * eig.vectors(r, c), 1e-9 * (1 + eig.values[0]));
    EXPECT_LT(orthonormality_error(eig.vectors), 1e-10);
  }
}

TEST(TruncatedSvd, RankOneOuterProduct) {
  const std::vector<double> u{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> v{2.0, 1.0, -2.0};
  Matrix x(4, 3);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) x(r, c) = u[r] * v[c];
  const Matrix q = truncated_svd(x, 1);
  ASSERT_EQ(q.cols(), 1u);
  // Sign rule: largest-magnitude entry positive, so q = +v/|v| here (|2| == |-2|, first wins).
  const double nv = 3.0;
  EXPECT_NEAR(std::abs(q(0, 0)), 2.0 / nv, 1e-12);
  EXPECT_NEAR(q(0, 0) * q(1, 0), 2.0 / 9.0, 1e-12);
  EXPECT_NEAR(q(0, 0) * q(2, 0), -4.0 / 9.0, 1e-12);
}

TEST(TruncatedSvd, DiagonalSpectrum) {
  const Matrix x = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  const Matrix q = truncated_svd(x, 2);
  Matrix e12(3, 2);
  e12(0, 0) = 1.0;
  e12(1, 1) = 1.0;
  for (double a : principal_angles(q, e12)) EXPECT_LT(a, 1e-12);
  EXPECT_NEAR(q(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(q(1, 1), 1.0, 1e-12);
}

TEST(TruncatedSvd, ProjectedEnergyMatchesGramEigenvalues) {
  std::mt19937_64 rng(5);
  const Matrix x = random_gaussian(32, 12, rng);
  const Matrix q = truncated_svd(x, 4);
  // Oracle: Eigen's own eigensolver on X^T X.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(x).transpose() * to_eigen(x));
  double top4 = 0.0;
  for (int i = 0; i < 4; ++i) top4 += ref.eigenvalues()(11 - i);
  EXPECT_NEAR(projected_energy(x, q) / top4, 1.0, 1e-8);
  EXPECT_LT(orthonormality_error(q), 1e-8);
}

TEST(TruncatedSvd, WideMatrixUsesLeftGram) {
  std::mt19937_64 rng(6);
  const Matrix x = random_gaussian(6, 20, rng);
  const Matrix q = truncated_svd(x, 3);
  Eigen::JacobiSVD<Eigen::MatrixXd> ref(to_eigen(x), Eigen::ComputeThinV);
  const Matrix v = from_eigen(ref.matrixV().leftCols(3));
  for (double a : principal_angles(q, v)) EXPECT_LT(a, 1e-7);
  EXPECT_LT(orthonormality_error(q), 1e-10);
}

TEST(TruncatedSvd, WideRankDeficientIsCompleted) {
  // 2 x 5, rank 1: third direction has to come from the completion path.
  const Matrix x = Matrix::from_rows({{1, 2, 0, 0, 0}, {2, 4, 0, 0, 0}});
  const Matrix q = truncated_svd(x, 2);
  EXPECT_LT(orthonormality_error(q), 1e-12);
  EXPECT_NEAR(projected_energy(x, q), frobenius_norm_sq(x), 1e-10);
}

TEST(TruncatedSvd, RankTooLargeThrows) {
  EXPECT_EQ(kind_of([] { truncated_svd(Matrix(3, 5, 1.0), 4); }), ErrorKind::RankTooLarge);
  EXPECT_EQ(kind_of([] { truncated_svd(Matrix(3, 5, 1.0), 0); }), ErrorKind::RankTooLarge);
}

TEST(TruncatedSvd, EckartYoungAgainstRandomBases) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = random_gaussian(16, 8, rng);
    const double best = std::sqrt(projected_energy(x, truncated_svd(x, 3)));
    const Matrix r = random_orthonormal(8, 3, rng);
    EXPECT_GE(best, std::sqrt(projected_energy(x, r)) - 1e-9);
  }
}

TEST(Projection, PythagorasAndIdempotence) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_gaussian(10, 7, rng);
    const Matrix q = random_orthonormal(7, 1 + trial % 7, rng);
    const Matrix proj = matmul_nt(matmul(x, q), q);
    const double total = frobenius_norm_sq(x);
    const double split = frobenius_norm_sq(proj) + frobenius_norm_sq(x - proj);
    EXPECT_NEAR(split / total, 1.0, 1e-6);
    const Matrix twice = matmul_nt(matmul(proj, q), q);
    EXPECT_LT(max_abs_diff(twice, proj), 1e-10);
  }
}

TEST(SingularValues, MatchesJacobiSvd) {
  std::mt19937_64 rng(9);
  const Matrix m = random_gaussian(9, 5, rng);
  const auto sv = singular_values(m);
  Eigen::JacobiSVD<Eigen::MatrixXd> ref(to_eigen(m));
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(sv[i], ref.singularValues()(i), 1e-12);
}

TEST(PrincipalAngles, IdenticalSpans) {
  const auto a = principal_angles(unit(3, 0), unit(3, 0));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], 0.0);
}

TEST(PrincipalAngles, OrthogonalSpans) {
  const auto a = principal_angles(unit(3, 0), unit(3, 1));
  EXPECT_NEAR(a[0], std::numbers::pi / 2, 1e-15);
}

TEST(PrincipalAngles, FortyFiveDegrees) {
  Matrix diag(3, 1);
  diag(0, 0) = diag(1, 0) = 1.0 / std::sqrt(2.0);
  const auto a = principal_angles(unit(3, 0), diag);
  EXPECT_NEAR(a[0], std::numbers::pi / 4, 1e-12);
}

TEST(PrincipalAngles, ContainmentGivesZeros) {
  std::mt19937_64 rng(10);
  const Matrix big = random_orthonormal(12, 5, rng);
  const Matrix sub = orthonormalize(matmul(big, random_gaussian(5, 2, rng)));
  const auto a = principal_angles(big, sub);
  ASSERT_EQ(a.size(), 2u);
  for (double v : a) EXPECT_LT(v, 1e-12);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
}

TEST(PrincipalAngles, NotOrthonormalThrows) {
  EXPECT_EQ(kind_of([] { principal_angles(Matrix(3, 1, 1.0), unit(3, 0)); }), ErrorKind::NotOrthonormal);
}
