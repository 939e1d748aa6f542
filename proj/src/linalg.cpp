#include "laser/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "laser/error.hpp"

namespace laser::linalg {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Tridiagonalizes the symmetric matrix held in v (row-major n x n) in place.
// On return v holds the accumulated orthogonal transform, d the diagonal and
// e the subdiagonal (e[0] unused).
void tridiagonalize(std::vector<double>& v, std::size_t n, std::vector<double>& d,
                    std::vector<double>& e) {
  auto V = [&](std::size_t r, std::size_t c) -> double& { return v[r * n + c]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). vt holds the transform transposed
// (row i = eigenvector i) so that plane rotations touch contiguous memory.
void tridiagonal_ql(std::vector<double>& vt, std::size_t n, std::vector<double>& d,
                    std::vector<double>& e) {
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  const int nn = static_cast<int>(n);
  for (int l = 0; l < nn; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < nn) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 200) throw Error(ErrorKind::DimensionMismatch, "eigensolver failed to converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < nn; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          double* vi = vt.data() + static_cast<std::size_t>(i) * n;
          double* vi1 = vi + n;
          for (std::size_t k = 0; k < n; ++k) {
            const double hk = vi1[k];
            vi1[k] = s * vi[k] + c * hk;
            vi[k] = c * vi[k] - s * hk;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

double frobenius_norm_sq(const Matrix& x) { return dot(x.data(), x.data(), x.size()); }

double frobenius_norm(const Matrix& x) { return std::sqrt(frobenius_norm_sq(x)); }

bool below_norm_floor(const Matrix& x) {
  return frobenius_norm(x) < 1e-12 * static_cast<double>(x.size());
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "frobenius_dot shape mismatch");
  }
  return dot(a.data(), b.data(), a.size());
}

Matrix orthonormalize(const Matrix& m, double drop_tol) {
  const std::size_t d = m.rows();
  Matrix cols = m.transposed();  // each row is one input column

  double max_norm = 0.0;
  for (std::size_t j = 0; j < cols.rows(); ++j) {
    max_norm = std::max(max_norm, std::sqrt(dot(cols.row(j).data(), cols.row(j).data(), d)));
  }

  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < cols.rows(); ++j) {
    double* v = cols.row(j).data();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t q : kept) {
        const double* u = cols.row(q).data();
        axpy(-dot(u, v, d), u, v, d);
      }
    }
    const double norm = std::sqrt(dot(v, v, d));
    if (max_norm == 0.0 || !(norm >= drop_tol * max_norm)) continue;
    for (std::size_t i = 0; i < d; ++i) v[i] /= norm;
    kept.push_back(j);
  }
  if (kept.empty()) {
    throw Error(ErrorKind::AllColumnsDegenerate, "every column fell below the drop tolerance");
  }

  Matrix q(d, kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const double* v = cols.row(kept[c]).data();
    for (std::size_t r = 0; r < d; ++r) q(r, c) = v[r];
  }
  return q;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "symmetric_eigen needs a square matrix");
  }
  const std::size_t n = s.rows();
  SymmetricEigen out;
  if (n == 1) {
    out.values = {s(0, 0)};
    out.vectors = Matrix(1, 1, 1.0);
    return out;
  }
  std::vector<double> v = s.values();
  std::vector<double> d(n), e(n);
  tridiagonalize(v, n, d, e);

  std::vector<double> vt(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) vt[c * n + r] = v[r * n + c];
  }
  tridiagonal_ql(vt, n, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });

  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d[order[c]];
    const double* src = vt.data() + order[c] * n;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = src[r];
  }
  return out;
}

void normalize_column_signs(Matrix& q) {
  for (std::size_t c = 0; c < q.cols(); ++c) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < q.rows(); ++r) {
      if (std::abs(q(r, c)) > best) {
        best = std::abs(q(r, c));
        arg = r;
      }
    }
    if (q(arg, c) < 0) {
      for (std::size_t r = 0; r < q.rows(); ++r) q(r, c) = -q(r, c);
    }
  }
}

Matrix truncated_svd(const Matrix& x, std::size_t k) {
  const std::size_t b = x.rows(), d = x.cols();
  if (k == 0 || k > std::min(b, d)) {
    throw Error(ErrorKind::RankTooLarge,
                "rank " + std::to_string(k) + " exceeds min(" + std::to_string(b) + ", " +
                    std::to_string(d) + ")");
  }

  Matrix q;
  if (d <= b) {
    const SymmetricEigen eig = symmetric_eigen(gram(x));
    q = eig.vectors.col_block(0, k);
  } else {
    // Right vectors from the left ones: v_i = X^T u_i / sigma_i.
    const SymmetricEigen eig = symmetric_eigen(gram(x.transposed()));
    const double lambda_floor = std::max(eig.values.front(), 0.0) * 1e-24;
    Matrix u_top(b, k);
    std::size_t usable = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(eig.values[i] > lambda_floor) || eig.values[i] <= 0.0) break;
      const double inv_sigma = 1.0 / std::sqrt(eig.values[i]);
      for (std::size_t r = 0; r < b; ++r) u_top(r, i) = eig.vectors(r, i) * inv_sigma;
      ++usable;
    }
    Matrix v = usable > 0 ? matmul_tn(x, u_top.col_block(0, usable)) : Matrix();
    // Complete with coordinate directions when X has fewer than k nonzero singular values.
    Matrix candidates = usable > 0 ? hstack(v, Matrix::identity(d)) : Matrix::identity(d);
    q = orthonormalize(candidates, 1e-8).col_block(0, k);
  }
  normalize_column_signs(q);
  return q;
}

std::vector<double> singular_values(const Matrix& m) {
  Matrix cols = m.transposed();  // rows of `cols` are the columns of m
  const std::size_t n = cols.rows(), len = cols.cols();
  const double tol = 1e-15;
  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double* ai = cols.row(i).data();
        double* aj = cols.row(j).data();
        const double alpha = dot(ai, ai, len);
        const double beta = dot(aj, aj, len);
        const double gamma = dot(ai, aj, len);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < len; ++r) {
          const double x = ai[r], y = aj[r];
          ai[r] = c * x - s * y;
          aj[r] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t i = 0; i < n; ++i) sv[i] = std::sqrt(dot(cols.row(i).data(), cols.row(i).data(), len));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

double orthonormality_error(const Matrix& q) {
  const Matrix g = gram(q);
  double err = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      err = std::max(err, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    }
  }
  return err;
}

std::vector<double> principal_angles(const Matrix& q1, const Matrix& q2) {
  if (q1.rows() != q2.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "principal_angles: ambient dimensions differ");
  }
  if (orthonormality_error(q1) > 1e-6 || orthonormality_error(q2) > 1e-6) {
    throw Error(ErrorKind::NotOrthonormal, "principal_angles inputs must be orthonormal");
  }
  const Matrix& big = q1.cols() >= q2.cols() ? q1 : q2;
  const Matrix& small = q1.cols() >= q2.cols() ? q2 : q1;

  // cosines from big^T small, sines from the residual of small outside span(big)
  const Matrix overlap = matmul_tn(big, small);
  const Matrix residual = small - matmul(big, overlap);
  std::vector<double> cosines = singular_values(overlap);
  std::vector<double> sines = singular_values(residual);
  std::sort(sines.begin(), sines.end());

  std::vector<double> angles(small.cols());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double c = std::min(1.0, cosines[i]);
    const double s = std::min(1.0, sines[i]);
    angles[i] = (c * c >= 0.5) ? std::asin(s) : std::acos(c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

Matrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

Matrix random_orthonormal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return orthonormalize(random_gaussian(rows, cols, rng));
}

}  // namespace laser::linalg
