#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "laser/matrix.hpp"

namespace laser::quant {

enum class ScaleMode : std::uint8_t { MaxAbs = 0, FourSigma = 1 };

const char* to_string(ScaleMode mode);

/// Symmetric INT8 encoding of a whole block with one scale.
struct QuantizedBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> codes;  // in [-127, 127]
  double scale = 1.0;
  ScaleMode mode = ScaleMode::MaxAbs;
  std::size_t clip_count = 0;
};

// codes = round(clamp(x / scale, -127, 127)), rounding half away from zero.
QuantizedBlock quantize(const Matrix& x, ScaleMode mode);
Matrix dequantize(const QuantizedBlock& block);

/// Same scheme at an arbitrary bit depth (qmax = 2^(bits-1) - 1), returning
/// the dequantized values directly. bits must lie in [2, 52].
Matrix fake_quantize(const Matrix& x, int bits, ScaleMode mode);

// ||X - Xhat||^2 / ||X||^2; throws DegenerateReference when X is below the norm floor.
double relative_mse(const Matrix& x, const Matrix& xhat);

struct ProjectionStats {
  double mean_shift_pct = 0.0;  // mean over columns of |mean(Xhat_c) - mean(X_c)| / std(X_c), in %
  double std_shift_pct = 0.0;   // mean over columns of |std(Xhat_c) - std(X_c)| / std(X_c), in %
  double relative_mse = 0.0;
};

/// Compares X against dequantize(quantize(X Q)) Q^T. With apply_quantization
/// false the INT8 stage is skipped and only the projection is measured.
ProjectionStats quantized_projection_stats(const Matrix& x, const Matrix& q, ScaleMode mode,
                                           bool apply_quantization = true);

/// Header {u64 rows, u64 cols, f64 scale, u8 mode} followed by the raw code
/// bytes, all little-endian.
std::vector<std::uint8_t> serialize(const QuantizedBlock& block);
QuantizedBlock deserialize(std::span<const std::uint8_t> bytes);

}  // namespace laser::quant
