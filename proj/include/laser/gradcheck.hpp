#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "laser/model.hpp"
#include "laser/train.hpp"

namespace laser::model {

struct GradientCheckRow {
  std::size_t divisor = 1;          // every checked site compressed to dim / divisor
  double epsilon = 0.0;             // ||X_hat - X|| over all compressed tape entries
  double gradient_error = 0.0;      // ||g_tilde - g||
  double cosine = 1.0;              // cos(g, g_tilde)
  double bound = 1.0;               // 1 - 2 L ||lambda|| eps / ||g||
  bool bit_identical = false;
  // Reconstruction exact up to rounding (eps <= 1e-9 of the activation norm);
  // such rows are left out of the slope fit.
  bool lossless = false;
};

struct GradientCheckReport {
  double lipschitz = 0.0;       // empirical local Jacobian Lipschitz constant
  double upstream_norm = 0.0;   // ||dL/dlogits||
  double gradient_norm = 0.0;   // ||g|| with exact activations
  double slope = 0.0;           // least-squares slope of log error vs log eps over lossy rows
  std::vector<GradientCheckRow> rows;
};

// For each divisor, compresses `sites` onto the exact truncated SVD basis of
// their stacked activations and compares parameter gradients against the
// uncompressed backward, holding the upstream gradient fixed.
GradientCheckReport gradient_cosine_check(const ModelParams& params, const ModelConfig& cfg, const TokenBatch& batch,
                                          std::span<const Site> sites, std::span<const std::size_t> divisors,
                                          LossMask mask = LossMask::FullGrid, std::uint64_t seed = 0);

// Least-squares slope of log(y) against log(x); pairs with a non-positive entry are ignored.
double loglog_slope(std::span<const double> x, std::span<const double> y);

// One slope fitted jointly to several reports, each keeping its own intercept
// (each batch has its own Lipschitz constant and upstream norm).
double pooled_loglog_slope(std::span<const GradientCheckReport> reports);

}  // namespace laser::model
