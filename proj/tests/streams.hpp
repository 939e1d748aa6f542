#pragma once

// Synthetic activation streams shared by the tracker unit tests and the
// acceptance suite.

#include <random>
#include <vector>

#include "laser/linalg.hpp"
#include "laser/matrix.hpp"

namespace laser::testing {

/// Rows x = (g .* sigmas) U^T + noise * n with g, n standard Gaussian and U a
/// fixed D x r orthonormal basis: a stationary stream with a planted
/// dominant subspace span(U).
class PlantedStream {
 public:
  PlantedStream(Matrix basis, std::vector<double> sigmas, double noise, std::uint64_t seed)
      : basis_(std::move(basis)), sigmas_(std::move(sigmas)), noise_(noise), rng_(seed) {}

  Matrix next(std::size_t batch) {
    Matrix g = linalg::random_gaussian(batch, basis_.cols(), rng_);
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < basis_.cols(); ++c) g(r, c) *= sigmas_[c];
    Matrix x = matmul_nt(g, basis_);
    if (noise_ > 0.0) {
      Matrix n = linalg::random_gaussian(batch, basis_.rows(), rng_);
      x += n * noise_;
    }
    return x;
  }

  const Matrix& basis() const { return basis_; }
  void set_basis(Matrix basis) { basis_ = std::move(basis); }

 private:
  Matrix basis_;
  std::vector<double> sigmas_;
  double noise_;
  std::mt19937_64 rng_;
};

// Cosine similarity between X and its reconstruction, computed the long way.
inline double explicit_cosine(const Matrix& x, const Matrix& xhat) {
  const double num = linalg::frobenius_dot(x, xhat);
  const double den = linalg::frobenius_norm(x) * linalg::frobenius_norm(xhat);
  return den == 0.0 ? 0.0 : num / den;
}

inline double max_angle(const Matrix& a, const Matrix& b) {
  const auto angles = linalg::principal_angles(a, b);
  return angles.empty() ? 0.0 : angles.back();
}

}  // namespace laser::testing
