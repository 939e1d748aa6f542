#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "laser/matrix.hpp"

namespace laser::linalg {

inline constexpr double kDropTolerance = 1e-10;

double frobenius_norm(const Matrix& x);
// ||X||_F < 1e-12 * element count
bool below_norm_floor(const Matrix& x);
double frobenius_norm_sq(const Matrix& x);
// <A, B>_F
double frobenius_dot(const Matrix& a, const Matrix& b);

/// Orthonormalizes the columns of `m` (D x r) with modified Gram-Schmidt and a
/// second re-orthogonalization pass. Columns whose residual norm falls below
/// `drop_tol` times the largest input column norm are dropped.
/// Throws ErrorKind::AllColumnsDegenerate when nothing survives.
Matrix orthonormalize(const Matrix& m, double drop_tol = kDropTolerance);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

/// Householder tridiagonalization followed by implicit QL.
SymmetricEigen symmetric_eigen(const Matrix& s);

/// Top-k right singular vectors of `x` (B x D) as a D x k orthonormal basis,
/// descending singular value order. Each column is sign-normalized so its
/// largest-magnitude entry is positive. Goes through the eigendecomposition of
/// the smaller of the two Gram matrices.
Matrix truncated_svd(const Matrix& x, std::size_t k);

/// Singular values (descending) by one-sided Jacobi rotations.
std::vector<double> singular_values(const Matrix& m);

/// max |Q^T Q - I|
double orthonormality_error(const Matrix& q);

/// Principal angles (radians, nondecreasing) between span(q1) and span(q2).
/// Both inputs must be orthonormal within 1e-6.
std::vector<double> principal_angles(const Matrix& q1, const Matrix& q2);

Matrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
Matrix random_orthonormal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// Flips each column so that its largest-magnitude entry is positive.
void normalize_column_signs(Matrix& q);

}  // namespace laser::linalg
