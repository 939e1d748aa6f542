#include "laser/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "laser/error.hpp"
#include "laser/linalg.hpp"

namespace laser::model {
namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (norm(a) * norm(b));
}

}  // namespace

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return 0.0;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

double pooled_loglog_slope(std::span<const GradientCheckReport> reports) {
  double sxy = 0.0, sxx = 0.0;
  for (const GradientCheckReport& r : reports) {
    std::vector<double> lx, ly;
    for (const GradientCheckRow& row : r.rows) {
      if (row.lossless || row.gradient_error <= 0.0) continue;
      lx.push_back(std::log(row.epsilon));
      ly.push_back(std::log(row.gradient_error));
    }
    if (lx.size() < 2) continue;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i] / n;
      my += ly[i] / n;
    }
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

GradientCheckReport gradient_cosine_check(const ModelParams& params, const ModelConfig& cfg, const TokenBatch& batch,
                                          std::span<const Site> sites, std::span<const std::size_t> divisors,
                                          LossMask mask, std::uint64_t seed) {
  const ForwardResult exact = forward_recursive(params, cfg, batch.inputs, batch.size);
  const LossResult loss = cross_entropy(exact.logits, batch.inputs, batch.targets, mask);
  const std::vector<double> g = flatten(backward_with_reconstruction(params, exact.tape, loss.dlogits));

  GradientCheckReport report;
  report.upstream_norm = linalg::frobenius_norm(loss.dlogits);
  report.gradient_norm = norm(g);

  std::vector<std::vector<Matrix>> stacked_sources;
  double activation_sq = 0.0;
  for (Site s : sites) {
    std::vector<Matrix> per_cycle;
    for (std::size_t c = 0; c < cfg.cycles; ++c) {
      per_cycle.push_back(exact.tape.entry(s, c).value());
      activation_sq += linalg::frobenius_norm_sq(per_cycle.back());
    }
    stacked_sources.push_back(std::move(per_cycle));
  }
  const double noise_floor = 1e-9 * std::sqrt(activation_sq);

  std::vector<double> eps_seen;
  for (std::size_t divisor : divisors) {
    if (divisor == 0) throw Error(ErrorKind::InvalidConfig, "divisor must be >= 1");
    std::vector<FixedBasisProvider> providers;
    providers.reserve(sites.size());
    CompressionPlan plan;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const Matrix x = vstack(stacked_sources[i]);
      const std::size_t dim = site_dim(cfg, sites[i]);
      const std::size_t k = std::max<std::size_t>(1, dim / divisor);
      providers.emplace_back(k >= dim ? Matrix::identity(dim) : linalg::truncated_svd(x, std::min(k, x.rows())));
    }
    for (std::size_t i = 0; i < sites.size(); ++i) plan[sites[i]] = &providers[i];

    const ForwardResult approx = forward_recursive(params, cfg, batch.inputs, batch.size, &plan);
    const std::vector<double> gt = flatten(backward_with_reconstruction(params, approx.tape, loss.dlogits));

    GradientCheckRow row;
    row.divisor = divisor;
    double eps_sq = 0.0;
    for (const TapeEntry& e : approx.tape.entries) {
      if (e.compressed()) eps_sq += linalg::frobenius_norm_sq(e.value() - exact.tape.entry(e.site, e.cycle).value());
    }
    row.epsilon = std::sqrt(eps_sq);
    row.gradient_error = distance(g, gt);
    row.cosine = cosine(g, gt);
    row.bit_identical = g == gt;
    row.lossless = row.epsilon <= noise_floor;
    report.rows.push_back(row);
    if (!row.lossless) eps_seen.push_back(row.epsilon);
  }

  // Local Lipschitz estimate of a -> J(a)^T lambda: random perturbations of the
  // checked sites at each of the observed error magnitudes.
  std::mt19937_64 rng(seed);
  constexpr int kTrials = 6;
  for (double scale : eps_seen) {
    for (int t = 0; t < kTrials; ++t) {
      Tape perturbed = exact.tape;
      std::vector<Matrix> deltas;
      double total = 0.0;
      for (Site s : sites) {
        for (std::size_t c = 0; c < cfg.cycles; ++c) {
          const Matrix& x = std::get<Matrix>(exact.tape.entry(s, c).payload);
          deltas.push_back(linalg::random_gaussian(x.rows(), x.cols(), rng));
          total += linalg::frobenius_norm_sq(deltas.back());
        }
      }
      const double factor = scale / std::sqrt(total);
      std::size_t d = 0;
      for (Site s : sites) {
        for (std::size_t c = 0; c < cfg.cycles; ++c) {
          auto& payload = perturbed.entries[c * kAllSites.size() + static_cast<std::size_t>(s)].payload;
          std::get<Matrix>(payload) += deltas[d++] * factor;
        }
      }
      const std::vector<double> gp = flatten(backward_with_reconstruction(params, perturbed, loss.dlogits));
      report.lipschitz = std::max(report.lipschitz, distance(g, gp) / (report.upstream_norm * scale));
    }
  }

  std::vector<double> eps, err;
  for (GradientCheckRow& row : report.rows) {
    row.bound = 1.0 - 2.0 * report.lipschitz * report.upstream_norm * row.epsilon / report.gradient_norm;
    if (row.lossless) continue;
    eps.push_back(row.epsilon);
    err.push_back(row.gradient_error);
  }
  report.slope = loglog_slope(eps, err);
  return report;
}

}  // namespace laser::model
