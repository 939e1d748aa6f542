#include "laser/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "laser/error.hpp"

namespace laser {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AllColumnsDegenerate: return "AllColumnsDegenerate";
    case ErrorKind::RankTooLarge: return "RankTooLarge";
    case ErrorKind::NotOrthonormal: return "NotOrthonormal";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateInit: return "DegenerateInit";
    case ErrorKind::DegenerateReference: return "DegenerateReference";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::UninitializedTracker: return "UninitializedTracker";
    case ErrorKind::TapeMismatch: return "TapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch, "data length does not match rows x cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t.data_[c * rows_ + r] = data_[r * cols_ + c];
  }
  return t;
}

Matrix Matrix::row_block(std::size_t begin, std::size_t count) const {
  if (begin + count > rows_) throw Error(ErrorKind::ShapeMismatch, "row block out of range");
  Matrix out(count, cols_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_), count * cols_,
              out.data_.begin());
  return out;
}

Matrix Matrix::col_block(std::size_t begin, std::size_t count) const {
  if (begin + count > cols_) throw Error(ErrorKind::ShapeMismatch, "column block out of range");
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, begin + c);
  }
  return out;
}

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw Error(ErrorKind::ShapeMismatch, "operator+= shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw Error(ErrorKind::ShapeMismatch, "operator-= shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

namespace {

constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 16;
constexpr std::size_t kDepthBlock = 128;

// c[r][j] += sum_k a(r, k) * b(k, j) over one tile, with a(r, k) at
// a[r * a_rs + k * a_ks] and b(k, j) at b[k * b_ks + j]. Partial tiles take
// `rows` and `cols` below the maxima. Every output continues its running sum
// over k in increasing order, so results do not depend on tiling or on how
// the depth is split.
void gemm_tile(const double* a, std::size_t a_rs, std::size_t a_ks, const double* b, std::size_t b_ks,
               std::size_t depth, double* c, std::size_t c_rs, std::size_t rows, std::size_t cols) {
  if (rows == kTileRows && cols == kTileCols) {
    // Two 8-wide lanes per row; with AVX-512 the accumulators live in 8 registers.
    using Lane = double __attribute__((vector_size(64)));
    Lane acc[kTileRows][2];
    for (std::size_t r = 0; r < kTileRows; ++r) {
      std::memcpy(&acc[r][0], c + r * c_rs, sizeof(Lane));
      std::memcpy(&acc[r][1], c + r * c_rs + 8, sizeof(Lane));
    }
    for (std::size_t k = 0; k < depth; ++k) {
      Lane lo, hi;
      std::memcpy(&lo, b + k * b_ks, sizeof lo);
      std::memcpy(&hi, b + k * b_ks + 8, sizeof hi);
      for (std::size_t r = 0; r < kTileRows; ++r) {
        const double x = a[r * a_rs + k * a_ks];
        acc[r][0] += x * lo;
        acc[r][1] += x * hi;
      }
    }
    for (std::size_t r = 0; r < kTileRows; ++r) {
      std::memcpy(c + r * c_rs, &acc[r][0], sizeof(Lane));
      std::memcpy(c + r * c_rs + 8, &acc[r][1], sizeof(Lane));
    }
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      double sum = c[r * c_rs + j];
      for (std::size_t k = 0; k < depth; ++k) sum += a[r * a_rs + k * a_ks] * b[k * b_ks + j];
      c[r * c_rs + j] = sum;
    }
  }
}

void gemm(const double* a, std::size_t a_rs, std::size_t a_ks, const double* b, std::size_t b_ks, std::size_t n,
          std::size_t depth, std::size_t m, double* c) {
  for (std::size_t k0 = 0; k0 < depth; k0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, depth - k0);
    const double* ak = a + k0 * a_ks;
    const double* bk = b + k0 * b_ks;
    for (std::size_t i = 0; i < n; i += kTileRows) {
      const std::size_t rows = std::min(kTileRows, n - i);
      for (std::size_t j = 0; j < m; j += kTileCols) {
        gemm_tile(ak + i * a_rs, a_rs, a_ks, bk + j, b_ks, kc, c + i * m + j, m, rows, std::min(kTileCols, m - j));
      }
    }
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "matmul inner dimension");
  Matrix c(a.rows(), b.cols());
  gemm(a.data(), a.cols(), 1, b.data(), b.cols(), a.rows(), a.cols(), b.cols(), c.data());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "matmul_tn row dimension");
  Matrix c(a.cols(), b.cols());
  gemm(a.data(), 1, a.cols(), b.data(), b.cols(), a.cols(), a.rows(), b.cols(), c.data());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::ShapeMismatch, "matmul_nt column dimension");
  return matmul(a, b.transposed());
}

Matrix gram(const Matrix& a) {
  Matrix g = matmul_tn(a, a);
  // Mirror the upper triangle so the result is exactly symmetric.
  const std::size_t p = g.rows();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  }
  return g;
}

Matrix vstack(std::span<const Matrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t cols = blocks.front().cols();
  std::size_t rows = 0;
  for (const Matrix& b : blocks) {
    if (b.cols() != cols) throw Error(ErrorKind::ShapeMismatch, "vstack column mismatch");
    rows += b.rows();
  }
  Matrix out(rows, cols);
  auto it = out.values().begin();
  for (const Matrix& b : blocks) it = std::copy(b.values().begin(), b.values().end(), it);
  return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "hstack row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "max_abs_diff shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace laser
