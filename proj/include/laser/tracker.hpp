#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "laser/matrix.hpp"

namespace laser {

using BasisRef = std::shared_ptr<const Matrix>;

struct TrackerConfig {
  std::size_t initial_rank = 128;
  double fidelity_threshold = 0.95;
  std::size_t patience = 2;
  std::size_t expansion_size = 4;
  std::size_t max_rank = 512;
  std::size_t power_steps = 1;
  std::uint64_t seed = 0;

  // Throws ErrorKind::InvalidConfig.
  void validate() const;
};

enum class TrackerEvent {
  PowerUpdated,
  Expanded,
  HardReset,
  // Batch below the norm floor: fidelity reported as 1, basis untouched.
  Bypassed,
};

const char* to_string(TrackerEvent event);

struct StepOutcome {
  Matrix z;          // X * Q with the basis held on entry to the step
  BasisRef basis;    // that basis; reconstruction for backward uses it
  double fidelity = 1.0;
  double post_fidelity = 1.0;  // fidelity of the same batch under the updated basis
  TrackerEvent event = TrackerEvent::PowerUpdated;
  std::size_t old_rank = 0;
  std::size_t new_rank = 0;
  bool skip_backward = false;
};

struct TrackerLogEntry {
  std::size_t step = 0;
  std::string site;
  double fidelity = 1.0;
  std::size_t rank = 0;
  std::string event;
};

// ||Z||_F / ||X||_F, or 1 when X is below the norm floor.
double fidelity(const Matrix& z, const Matrix& x);
// Z * Q^T
Matrix reconstruct(const Matrix& z, const Matrix& q);

/// Per-site low-rank subspace tracker.
///
/// Each step compresses the batch with the current basis, scores the
/// projection by its fidelity and then refreshes the basis: a single power
/// iteration when fidelity clears the threshold, otherwise a residual
/// expansion, escalating to an exact truncated SVD of the batch once the
/// failure counter reaches the patience limit.
///
/// Not thread-safe per instance; independent sites can be stepped concurrently.
class SiteTracker {
 public:
  /// Basis from the top initial_rank right singular vectors of x0. The rank is
  /// clamped to min(B, D) when needed and the clamp is logged.
  static SiteTracker init_site(std::string site_id, const Matrix& x0, TrackerConfig config);
  /// Starts from a caller-supplied orthonormal basis.
  static SiteTracker from_basis(std::string site_id, Matrix q, TrackerConfig config);

  Matrix compress(const Matrix& x) const;
  StepOutcome step(const Matrix& x);

  // Individual transitions. step() is the intended entry point; these are
  // public so each branch can be driven on its own.
  void power_update(const Matrix& x, const Matrix& z);
  void expand(const Matrix& x);
  void hard_reset(const Matrix& x);

  const std::string& site_id() const noexcept { return site_id_; }
  const Matrix& basis() const noexcept { return *basis_; }
  BasisRef basis_ref() const noexcept { return basis_; }
  std::size_t rank() const noexcept { return basis_->cols(); }
  std::size_t dim() const noexcept { return basis_->rows(); }
  std::size_t fail_counter() const noexcept { return fail_counter_; }
  std::size_t step_index() const noexcept { return step_index_; }
  std::size_t initial_rank() const noexcept { return initial_rank_; }
  std::size_t max_rank() const noexcept { return max_rank_; }
  const TrackerConfig& config() const noexcept { return config_; }
  const std::vector<TrackerLogEntry>& log() const noexcept { return log_; }

  /// One JSON object per line: {"step","site","fidelity","rank","event"}.
  std::string log_jsonl() const;

 private:
  SiteTracker(std::string site_id, TrackerConfig config, std::size_t dim);

  void set_basis(Matrix q);
  void record(double fidelity, const std::string& event);

  std::string site_id_;
  TrackerConfig config_;
  BasisRef basis_;
  std::size_t initial_rank_ = 0;
  std::size_t max_rank_ = 0;
  std::size_t fail_counter_ = 0;
  std::size_t step_index_ = 0;
  std::mt19937_64 rng_;
  std::vector<TrackerLogEntry> log_;
};

}  // namespace laser
