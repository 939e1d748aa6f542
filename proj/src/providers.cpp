#include "laser/providers.hpp"

#include <algorithm>
#include <random>

#include "laser/error.hpp"
#include "laser/linalg.hpp"

namespace laser {
namespace {

CompressionDecision project(const Matrix& x, BasisRef q, const char* event) {
  if (x.cols() != q->rows()) {
    throw Error(ErrorKind::DimensionMismatch, "basis has " + std::to_string(q->rows()) + " rows, activations " +
                                                  std::to_string(x.cols()) + " columns");
  }
  CompressionDecision d;
  d.z = matmul(x, *q);
  d.fidelity = fidelity(d.z, x);
  d.basis = std::move(q);
  d.event = event;
  return d;
}

std::size_t feasible_rank(const Matrix& x, std::size_t k) { return std::min({k, x.rows(), x.cols()}); }

}  // namespace

CompressionDecision LaserProvider::process(const Matrix& x) {
  // Rank at or above the site dimension: nothing to track, and the tracker's
  // power step would shed directions the current batch does not span.
  if (config_.initial_rank >= x.cols()) {
    if (!identity_ || identity_->rows() != x.cols()) identity_ = std::make_shared<const Matrix>(Matrix::identity(x.cols()));
    return project(x, identity_, "full");
  }
  if (!tracker_) {
    tracker_.emplace(SiteTracker::init_site(site_id_, x, config_));
    return project(x, tracker_->basis_ref(), "init");
  }
  StepOutcome s = tracker_->step(x);
  CompressionDecision d;
  d.z = std::move(s.z);
  d.basis = std::move(s.basis);
  d.fidelity = s.fidelity;
  d.event = to_string(s.event);
  d.skip_backward = s.skip_backward;
  return d;
}

std::size_t LaserProvider::rank() const {
  if (identity_) return identity_->cols();
  return tracker_ ? tracker_->rank() : config_.initial_rank;
}

CompressionDecision OracleSvdProvider::process(const Matrix& x) {
  auto q = std::make_shared<const Matrix>(linalg::truncated_svd(x, feasible_rank(x, rank_)));
  return project(x, std::move(q), "oracle");
}

CompressionDecision StaticBasisProvider::process(const Matrix& x) {
  if (!basis_) basis_ = std::make_shared<const Matrix>(linalg::truncated_svd(x, feasible_rank(x, rank_)));
  return project(x, basis_, "static");
}

RandomProjectionProvider::RandomProjectionProvider(std::size_t dim, std::size_t rank, std::uint64_t seed) {
  if (rank == 0 || rank > dim) throw Error(ErrorKind::RankTooLarge, "random projection rank out of range");
  std::mt19937_64 rng(seed);
  basis_ = std::make_shared<const Matrix>(linalg::random_orthonormal(dim, rank, rng));
}

CompressionDecision RandomProjectionProvider::process(const Matrix& x) { return project(x, basis_, "random"); }

CompressionDecision FixedBasisProvider::process(const Matrix& x) { return project(x, basis_, "fixed"); }

}  // namespace laser
