#include "laser/quant.hpp"

#include <algorithm>
#include <cmath>

#include "laser/binary_io.hpp"
#include "laser/error.hpp"
#include "laser/linalg.hpp"

namespace laser::quant {
namespace {

double max_abs(const Matrix& x) {
  double m = 0.0;
  for (double v : x.values()) m = std::max(m, std::abs(v));
  return m;
}

// Population standard deviation over the whole block.
double block_sigma(const Matrix& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x.values()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x.values()) var += (v - mean) * (v - mean);
  return std::sqrt(var / n);
}

double choose_scale(const Matrix& x, ScaleMode mode, double qmax) {
  const double range = mode == ScaleMode::MaxAbs ? max_abs(x) : 4.0 * block_sigma(x);
  return range > 0.0 ? range / qmax : 1.0;
}

struct ColumnMoments {
  std::vector<double> mean;
  std::vector<double> stddev;
};

ColumnMoments column_moments(const Matrix& x) {
  ColumnMoments m{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 0.0)};
  const double n = static_cast<double>(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m.mean[c] += x(r, c);
  for (double& v : m.mean) v /= n;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = x(r, c) - m.mean[c];
      m.stddev[c] += d * d;
    }
  }
  for (double& v : m.stddev) v = std::sqrt(v / n);
  return m;
}

}  // namespace

const char* to_string(ScaleMode mode) { return mode == ScaleMode::MaxAbs ? "maxabs" : "4sigma"; }

QuantizedBlock quantize(const Matrix& x, ScaleMode mode) {
  QuantizedBlock q;
  q.rows = x.rows();
  q.cols = x.cols();
  q.mode = mode;
  q.codes.assign(x.size(), 0);
  if (linalg::below_norm_floor(x)) {
    q.scale = 1.0;
    return q;
  }
  q.scale = choose_scale(x, mode, 127.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x.data()[i] / q.scale;
    // Slack absorbs the last-ulp overshoot of max|x| / (max|x| / 127).
    if (std::abs(t) > 127.0 * (1.0 + 1e-12)) ++q.clip_count;
    q.codes[i] = static_cast<std::int8_t>(std::round(std::clamp(t, -127.0, 127.0)));
  }
  return q;
}

Matrix dequantize(const QuantizedBlock& block) {
  Matrix out(block.rows, block.cols);
  for (std::size_t i = 0; i < block.codes.size(); ++i) out.data()[i] = block.codes[i] * block.scale;
  return out;
}

Matrix fake_quantize(const Matrix& x, int bits, ScaleMode mode) {
  if (bits < 2 || bits > 52) throw Error(ErrorKind::InvalidConfig, "fake_quantize: bits must be in [2, 52]");
  if (linalg::below_norm_floor(x)) return Matrix(x.rows(), x.cols());
  const double qmax = std::ldexp(1.0, bits - 1) - 1.0;
  const double scale = choose_scale(x, mode, qmax);
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.data()[i] = std::round(std::clamp(x.data()[i] / scale, -qmax, qmax)) * scale;
  }
  return out;
}

double relative_mse(const Matrix& x, const Matrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "relative_mse shape mismatch");
  }
  if (linalg::below_norm_floor(x)) throw Error(ErrorKind::DegenerateReference, "reference block is (near) zero");
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - xhat.data()[i];
    err += d * d;
  }
  return err / linalg::frobenius_norm_sq(x);
}

ProjectionStats quantized_projection_stats(const Matrix& x, const Matrix& q, ScaleMode mode,
                                           bool apply_quantization) {
  if (x.cols() != q.rows()) throw Error(ErrorKind::DimensionMismatch, "projection basis does not match X");
  Matrix z = matmul(x, q);
  if (apply_quantization) z = dequantize(quantize(z, mode));
  const Matrix xhat = matmul_nt(z, q);

  const ColumnMoments ref = column_moments(x);
  const ColumnMoments got = column_moments(xhat);
  ProjectionStats s;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    if (ref.stddev[c] <= 0.0) continue;
    s.mean_shift_pct += std::abs(got.mean[c] - ref.mean[c]) / ref.stddev[c];
    s.std_shift_pct += std::abs(got.stddev[c] - ref.stddev[c]) / ref.stddev[c];
    ++counted;
  }
  if (counted > 0) {
    s.mean_shift_pct *= 100.0 / static_cast<double>(counted);
    s.std_shift_pct *= 100.0 / static_cast<double>(counted);
  }
  s.relative_mse = relative_mse(x, xhat);
  return s;
}

std::vector<std::uint8_t> serialize(const QuantizedBlock& block) {
  io::ByteWriter w;
  w.put<std::uint64_t>(block.rows);
  w.put<std::uint64_t>(block.cols);
  w.put<double>(block.scale);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(block.mode));
  for (std::int8_t c : block.codes) w.put<std::int8_t>(c);
  return w.take();
}

QuantizedBlock deserialize(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  QuantizedBlock b;
  b.rows = r.get<std::uint64_t>("rows");
  b.cols = r.get<std::uint64_t>("cols");
  b.scale = r.get<double>("scale");
  const std::size_t mode_offset = r.offset();
  const auto mode = r.get<std::uint8_t>("mode");
  if (mode > 1) throw CorruptFileError(mode_offset, "unknown scale mode");
  b.mode = static_cast<ScaleMode>(mode);
  if (!(b.scale > 0.0)) throw CorruptFileError(mode_offset - sizeof(double), "scale must be positive");
  if (b.cols != 0 && b.rows > r.remaining() / b.cols) throw CorruptFileError(r.offset(), "code payload too short");
  const auto raw = r.get_bytes(b.rows * b.cols, "codes");
  b.codes.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    b.codes[i] = static_cast<std::int8_t>(raw[i]);
    if (b.codes[i] == -128) throw CorruptFileError(r.offset() - raw.size() + i, "code outside [-127, 127]");
  }
  return b;
}

}  // namespace laser::quant
