#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "laser/matrix.hpp"
#include "laser/tracker.hpp"

namespace laser {

// What a provider did with one batch of stacked site activations.
struct CompressionDecision {
  Matrix z;        // X * Q
  BasisRef basis;  // Q used to produce z
  double fidelity = 1.0;
  std::string event;
  bool skip_backward = false;
};

// Supplies the basis a compressed site is projected onto, one call per batch.
class BasisProvider {
 public:
  virtual ~BasisProvider() = default;
  virtual CompressionDecision process(const Matrix& x) = 0;
  // Rank the next batch will be compressed to.
  virtual std::size_t rank() const = 0;
  virtual const char* kind() const = 0;
};

// Streaming tracker. The first batch initialises the basis from its own SVD.
// An initial rank at or above the site dimension keeps the site lossless:
// the identity basis is used and no tracker is created.
class LaserProvider final : public BasisProvider {
 public:
  LaserProvider(std::string site_id, TrackerConfig config) : site_id_(std::move(site_id)), config_(config) {}
  CompressionDecision process(const Matrix& x) override;
  std::size_t rank() const override;
  const char* kind() const override { return "laser"; }
  const SiteTracker* tracker() const { return tracker_ ? &*tracker_ : nullptr; }

 private:
  std::string site_id_;
  TrackerConfig config_;
  std::optional<SiteTracker> tracker_;
  BasisRef identity_;
};

// Exact truncated SVD of every batch.
class OracleSvdProvider final : public BasisProvider {
 public:
  explicit OracleSvdProvider(std::size_t rank) : rank_(rank) {}
  CompressionDecision process(const Matrix& x) override;
  std::size_t rank() const override { return rank_; }
  const char* kind() const override { return "oracle"; }

 private:
  std::size_t rank_;
};

// Basis frozen at the truncated SVD of the first batch.
class StaticBasisProvider final : public BasisProvider {
 public:
  explicit StaticBasisProvider(std::size_t rank) : rank_(rank) {}
  CompressionDecision process(const Matrix& x) override;
  std::size_t rank() const override { return rank_; }
  const char* kind() const override { return "static"; }

 private:
  std::size_t rank_;
  BasisRef basis_;
};

// Data-independent orthonormalised Gaussian basis, fixed at construction.
class RandomProjectionProvider final : public BasisProvider {
 public:
  RandomProjectionProvider(std::size_t dim, std::size_t rank, std::uint64_t seed);
  CompressionDecision process(const Matrix& x) override;
  std::size_t rank() const override { return basis_->cols(); }
  const char* kind() const override { return "random"; }

 private:
  BasisRef basis_;
};

// Caller-supplied basis; used by gradient checks and tests.
class FixedBasisProvider final : public BasisProvider {
 public:
  explicit FixedBasisProvider(Matrix q) : basis_(std::make_shared<const Matrix>(std::move(q))) {}
  CompressionDecision process(const Matrix& x) override;
  std::size_t rank() const override { return basis_->cols(); }
  const char* kind() const override { return "fixed"; }

 private:
  BasisRef basis_;
};

}  // namespace laser
