#include "laser/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "laser/error.hpp"
#include "laser/linalg.hpp"

namespace laser {
namespace {

// FNV-1a, so per-site RNG streams do not depend on std::hash.
std::uint64_t site_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void TrackerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, "tracker: " + msg); };
  if (initial_rank < 1) fail("initial_rank must be >= 1");
  if (initial_rank > max_rank) fail("initial_rank must not exceed max_rank");
  if (!(fidelity_threshold > 0.0 && fidelity_threshold <= 1.0)) fail("fidelity_threshold must be in (0, 1]");
  if (patience < 1) fail("patience must be >= 1");
  if (expansion_size < 1) fail("expansion_size must be >= 1");
  if (power_steps < 1) fail("power_steps must be >= 1");
}

const char* to_string(TrackerEvent event) {
  switch (event) {
    case TrackerEvent::PowerUpdated: return "power";
    case TrackerEvent::Expanded: return "expand";
    case TrackerEvent::HardReset: return "reset";
    case TrackerEvent::Bypassed: return "bypass";
  }
  return "unknown";
}

double fidelity(const Matrix& z, const Matrix& x) {
  if (linalg::below_norm_floor(x)) return 1.0;
  return linalg::frobenius_norm(z) / linalg::frobenius_norm(x);
}

Matrix reconstruct(const Matrix& z, const Matrix& q) {
  if (z.cols() != q.cols()) throw Error(ErrorKind::DimensionMismatch, "reconstruct: Z and Q ranks differ");
  return matmul_nt(z, q);
}

SiteTracker::SiteTracker(std::string site_id, TrackerConfig config, std::size_t dim)
    : site_id_(std::move(site_id)),
      config_(config),
      max_rank_(std::min(config.max_rank, dim)),
      rng_(config.seed ^ site_hash(site_id_)) {
  config_.validate();
}

SiteTracker SiteTracker::init_site(std::string site_id, const Matrix& x0, TrackerConfig config) {
  SiteTracker t(std::move(site_id), config, x0.cols());
  if (linalg::below_norm_floor(x0)) {
    throw Error(ErrorKind::DegenerateInit, "site " + t.site_id_ + ": initial batch is (near) zero");
  }
  const std::size_t feasible = std::min(x0.rows(), x0.cols());
  t.initial_rank_ = std::min(config.initial_rank, feasible);
  t.max_rank_ = std::max(t.max_rank_, t.initial_rank_);
  t.set_basis(linalg::truncated_svd(x0, t.initial_rank_));
  if (t.initial_rank_ < config.initial_rank) t.record(1.0, "init_clamped");
  t.record(fidelity(t.compress(x0), x0), "init");
  return t;
}

SiteTracker SiteTracker::from_basis(std::string site_id, Matrix q, TrackerConfig config) {
  if (linalg::orthonormality_error(q) > 1e-6) {
    throw Error(ErrorKind::NotOrthonormal, "from_basis: supplied basis is not orthonormal");
  }
  SiteTracker t(std::move(site_id), config, q.rows());
  t.initial_rank_ = std::min(config.initial_rank, q.rows());
  t.max_rank_ = std::max(t.max_rank_, q.cols());
  t.set_basis(std::move(q));
  t.record(1.0, "init");
  return t;
}

void SiteTracker::set_basis(Matrix q) { basis_ = std::make_shared<const Matrix>(std::move(q)); }

void SiteTracker::record(double f, const std::string& event) {
  log_.push_back({step_index_, site_id_, f, rank(), event});
}

Matrix SiteTracker::compress(const Matrix& x) const {
  if (x.cols() != dim()) {
    throw Error(ErrorKind::DimensionMismatch, "site " + site_id_ + ": expected " + std::to_string(dim()) +
                                                  " columns, got " + std::to_string(x.cols()));
  }
  return matmul(x, *basis_);
}

void SiteTracker::power_update(const Matrix& x, const Matrix& z) {
  const bool negligible = std::all_of(x.values().begin(), x.values().end(),
                                      [](double v) { return std::abs(v) < linalg::kDropTolerance; });
  if (negligible) {
    throw Error(ErrorKind::AllColumnsDegenerate, "site " + site_id_ + ": batch entries below drop tolerance");
  }
  Matrix q = linalg::orthonormalize(matmul_tn(x, z));
  for (std::size_t s = 1; s < config_.power_steps; ++s) {
    q = linalg::orthonormalize(matmul_tn(x, matmul(x, q)));
  }
  set_basis(std::move(q));
  fail_counter_ = 0;
}

void SiteTracker::expand(const Matrix& x) {
  const Matrix& q = *basis_;
  const std::size_t b = x.rows();
  const std::size_t m = std::min(config_.expansion_size, b);

  // Partial Fisher-Yates: uniform sample of m distinct rows.
  std::vector<std::size_t> idx(b);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, b - 1);
    std::swap(idx[i], idx[pick(rng_)]);
  }
  Matrix sampled(m, x.cols());
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(x.row(idx[i]).begin(), x.row(idx[i]).end(), sampled.row(i).begin());
  }

  // R_perp = R - R Q Q^T
  const Matrix residual = sampled - matmul_nt(matmul(sampled, q), q);

  struct Candidate {
    std::size_t row;
    double norm;
  };
  std::vector<Candidate> keep;
  for (std::size_t i = 0; i < m; ++i) {
    const double row_norm = std::sqrt(std::inner_product(sampled.row(i).begin(), sampled.row(i).end(),
                                                         sampled.row(i).begin(), 0.0));
    const double res_norm = std::sqrt(std::inner_product(residual.row(i).begin(), residual.row(i).end(),
                                                         residual.row(i).begin(), 0.0));
    if (row_norm > 0.0 && res_norm >= linalg::kDropTolerance * row_norm) keep.push_back({i, res_norm});
  }

  const std::size_t capacity = max_rank_ > rank() ? max_rank_ - rank() : 0;
  if (keep.size() > capacity) {
    std::stable_sort(keep.begin(), keep.end(), [](const Candidate& a, const Candidate& b) { return a.norm > b.norm; });
    keep.resize(capacity);
    std::sort(keep.begin(), keep.end(), [](const Candidate& a, const Candidate& b) { return a.row < b.row; });
  }
  if (keep.empty()) return;

  Matrix appended(q.rows(), keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    for (std::size_t r = 0; r < q.rows(); ++r) appended(r, c) = residual(keep[c].row, r) / keep[c].norm;
  }
  set_basis(linalg::orthonormalize(hstack(q, appended)));
}

void SiteTracker::hard_reset(const Matrix& x) {
  if (linalg::below_norm_floor(x)) {
    throw Error(ErrorKind::DegenerateInit, "site " + site_id_ + ": reset batch is (near) zero");
  }
  const std::size_t k = std::min({initial_rank_, x.rows(), x.cols()});
  set_basis(linalg::truncated_svd(x, k));
  fail_counter_ = 0;
}

StepOutcome SiteTracker::step(const Matrix& x) {
  StepOutcome out;
  out.basis = basis_;
  out.z = compress(x);
  out.old_rank = rank();
  ++step_index_;

  if (linalg::below_norm_floor(x)) {
    out.fidelity = out.post_fidelity = 1.0;
    out.event = TrackerEvent::Bypassed;
    out.new_rank = rank();
    record(1.0, to_string(out.event));
    return out;
  }

  out.fidelity = fidelity(out.z, x);
  if (out.fidelity >= config_.fidelity_threshold) {
    try {
      power_update(x, out.z);
      out.event = TrackerEvent::PowerUpdated;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AllColumnsDegenerate) throw;
      hard_reset(x);
      out.event = TrackerEvent::HardReset;
    }
  } else {
    ++fail_counter_;
    if (fail_counter_ >= config_.patience) {
      hard_reset(x);
      out.event = TrackerEvent::HardReset;
    } else {
      expand(x);
      out.event = TrackerEvent::Expanded;
    }
  }
  out.skip_backward = out.event == TrackerEvent::HardReset;
  out.new_rank = rank();
  out.post_fidelity = fidelity(compress(x), x);
  record(out.fidelity, to_string(out.event));
  return out;
}

std::string SiteTracker::log_jsonl() const {
  std::ostringstream os;
  for (const TrackerLogEntry& e : log_) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["site"] = e.site;
    j["fidelity"] = e.fidelity;
    j["rank"] = e.rank;
    j["event"] = e.event;
    os << j.dump() << '\n';
  }
  return os.str();
}

}  // namespace laser
