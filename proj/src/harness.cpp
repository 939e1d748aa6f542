#include "laser/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <random>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "laser/checkpoint.hpp"
#include "laser/error.hpp"
#include "laser/linalg.hpp"
#include "laser/optimizer.hpp"
#include "laser/train.hpp"

namespace laser {
namespace fs = std::filesystem;
namespace {

std::uint64_t site_seed(std::uint64_t seed, model::Site site) {
  return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(site) + 1;
}

// Passes every batch through to the run's own provider and, when armed,
// scores the same batch under reference bases at the active rank.
class ShadowedProvider final : public BasisProvider {
 public:
  ShadowedProvider(std::unique_ptr<BasisProvider> inner, model::Site site, std::size_t dim, std::uint64_t seed,
                   std::vector<ShadowRecord>& sink)
      : inner_(std::move(inner)), site_(site), sink_(sink) {
    std::mt19937_64 rng(site_seed(seed, site_) ^ 0x5bd1e995ull);
    random_ = linalg::random_orthonormal(dim, dim, rng);
  }

  void arm(std::size_t step) {
    armed_ = true;
    step_ = step;
  }

  CompressionDecision process(const Matrix& x) override {
    CompressionDecision d = inner_->process(x);
    if (static_.empty()) static_ = linalg::truncated_svd(x, std::min(x.rows(), x.cols()));
    if (!armed_) return d;
    armed_ = false;

    const std::size_t k = d.basis->cols();
    ShadowRecord r;
    r.step = step_;
    r.site = model::site_name(site_);
    r.rank = k;
    r.active = d.fidelity;
    const std::size_t k_oracle = std::min({k, x.rows(), x.cols()});
    r.oracle = fidelity(matmul(x, linalg::truncated_svd(x, k_oracle)), x);
    r.static_basis = fidelity(matmul(x, static_.col_block(0, std::min(k, static_.cols()))), x);
    r.random = fidelity(matmul(x, random_.col_block(0, k)), x);
    sink_.push_back(r);
    return d;
  }

  std::size_t rank() const override { return inner_->rank(); }
  const char* kind() const override { return inner_->kind(); }

 private:
  std::unique_ptr<BasisProvider> inner_;
  model::Site site_;
  std::vector<ShadowRecord>& sink_;
  Matrix static_;
  Matrix random_;
  bool armed_ = false;
  std::size_t step_ = 0;
};

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

maze::DatasetSplit load_split(const RunConfig& config) {
  const auto all = maze::read_dataset(config.dataset_path);
  if (all.size() < config.train_count + config.val_count) {
    throw Error(ErrorKind::InvalidConfig, "dataset '" + config.dataset_path + "' holds " +
                                              std::to_string(all.size()) + " mazes, need " +
                                              std::to_string(config.train_count + config.val_count));
  }
  if (all.front().width * all.front().height != config.model.seq_len) {
    throw Error(ErrorKind::InvalidConfig, "dataset grids are " + std::to_string(all.front().width) + "x" +
                                              std::to_string(all.front().height) + ", config expects " +
                                              std::to_string(config.maze_size) + "x" +
                                              std::to_string(config.maze_size));
  }
  return maze::split_dataset(all, config.train_count, config.val_count);
}

std::unique_ptr<BasisProvider> make_provider(const RunConfig& config, model::Site site, std::uint64_t seed) {
  const std::size_t dim = model::site_dim(config.model, site);
  const SiteTrackerSettings& settings = config.settings_for(site);
  const std::size_t k = settings.initial_rank(dim);
  switch (config.mode) {
    case RunMode::Baseline:
      return nullptr;
    case RunMode::Laser: {
      TrackerConfig t = settings.tracker;
      t.initial_rank = k;
      t.max_rank = std::max(t.max_rank, k);
      t.seed = settings.tracker.seed + seed;
      return std::make_unique<LaserProvider>(model::site_name(site), t);
    }
    case RunMode::OracleSVD:
      return std::make_unique<OracleSvdProvider>(k);
    case RunMode::StaticBasis:
      return std::make_unique<StaticBasisProvider>(k);
    case RunMode::RandomProjection:
      return std::make_unique<RandomProjectionProvider>(dim, k, site_seed(seed, site));
  }
  return nullptr;
}

SeedMetrics run_seed(const RunConfig& config, std::uint64_t seed, const maze::DatasetSplit& data,
                     std::ostream* log) {
  using clock = std::chrono::steady_clock;
  SeedMetrics out;
  out.seed = seed;

  const auto& cfg = config.model;
  model::ModelParams params = model::init_params(cfg, seed);
  AdamW optimizer(params, AdamWConfig{config.beta1, config.beta2, 1e-8, config.weight_decay});

  model::CompressionPlan plan;
  std::vector<std::unique_ptr<BasisProvider>> owned;
  std::vector<ShadowedProvider*> shadows;
  for (model::Site site : config.eligible_sites()) {
    auto provider = make_provider(config, site, seed);
    if (config.shadow_interval > 0) {
      auto shadowed = std::make_unique<ShadowedProvider>(std::move(provider), site, model::site_dim(cfg, site), seed,
                                                         out.shadows);
      shadows.push_back(shadowed.get());
      provider = std::move(shadowed);
    }
    plan[site] = provider.get();
    owned.push_back(std::move(provider));
  }

  const std::size_t per_epoch = data.train.size() / config.batch_size;
  if (per_epoch == 0) throw Error(ErrorKind::InvalidConfig, "batch_size exceeds the training set");
  std::size_t total = config.epochs * per_epoch;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);

  const fs::path seed_dir = config.output_dir.empty() ? fs::path() : fs::path(config.output_dir) /
                                                                         ("seed_" + std::to_string(seed));
  CheckpointManifest manifest;
  manifest.config = to_json(config);
  manifest.seed = seed;
  manifest.dataset_path = fs::absolute(config.dataset_path).string();

  std::mt19937_64 shuffle_rng(seed ^ 0xD1B54A32D192ED03ull);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  const StepOptions base_options{config.lr, config.grad_clip, config.loss_mask};
  std::size_t step = 0;
  const auto started = clock::now();
  try {
    for (std::size_t epoch = 0; epoch < config.epochs && step < total; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t b = 0; b < per_epoch && step < total; ++b, ++step) {
        if (config.shadow_interval > 0 && step % config.shadow_interval == 0) {
          for (ShadowedProvider* s : shadows) s->arm(step);
        }
        const TokenBatch batch =
            make_batch(data.train, std::span<const std::size_t>(order).subspan(b * config.batch_size, config.batch_size));
        StepOptions options = base_options;
        options.lr = cosine_lr(step, total, config.lr, config.min_lr, config.warmup_steps);
        const StepResult r = train_step(params, optimizer, cfg, batch, owned.empty() ? nullptr : &plan, options);

        out.steps.push_back({step, epoch, r.loss, r.token_accuracy, options.lr, r.grad_norm, r.skipped});
        if (r.skipped) ++out.skipped_steps;
        for (const model::SiteOutcome& o : r.outcomes) {
          out.traces.push_back({step, model::site_name(o.site), o.decision.fidelity, o.decision.basis->cols(),
                                o.decision.event});
          if (o.decision.event == "reset") ++out.hard_resets;
        }
      }

      const model::Scores val = evaluate(params, cfg, data.val, config.eval_batch_size, config.loss_mask);
      out.evals.push_back({epoch, step, val.token_accuracy, val.solve_rate});
      if (log) {
        const double secs = std::chrono::duration<double>(clock::now() - started).count();
        char line[200];
        std::snprintf(line, sizeof line,
                      "[%s seed %llu] epoch %zu step %zu loss %.4f val_acc %.2f solved %.2f (%.0fs)\n",
                      to_string(config.mode), static_cast<unsigned long long>(seed), epoch + 1, step,
                      out.steps.back().loss, val.token_accuracy, val.solve_rate, secs);
        *log << line << std::flush;
      }
      if (!seed_dir.empty() && config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
        manifest.step = step;
        manifest.epoch = epoch + 1;
        char name[32];
        std::snprintf(name, sizeof name, "step_%06zu", step);
        save_checkpoint(seed_dir / "checkpoints" / name, params, manifest);
      }
    }
  } catch (const Error& e) {
    out.aborted = true;
    out.non_finite = e.kind() == ErrorKind::NonFiniteLoss;
    out.abort_reason = e.what();
    if (log) *log << "[" << to_string(config.mode) << " seed " << seed << "] aborted: " << e.what() << "\n";
  }

  if (!out.evals.empty()) {
    out.final_val_accuracy = out.evals.back().val_accuracy;
    out.final_solve_rate = out.evals.back().solve_rate;
  }
  std::vector<SiteRank> ranks;
  for (model::Site site : config.eligible_sites()) {
    ranks.push_back({site, std::min(plan[site]->rank(), model::site_dim(cfg, site))});
  }
  out.memory = memory_report(cfg, config.batch_size, ranks, config.bytes_per_elem);
  return out;
}

RunMetrics run_experiment(const RunConfig& config, std::ostream* log) {
  config.validate();
  const maze::DatasetSplit data = load_split(config);
  RunMetrics metrics;
  metrics.config = config;
  for (std::uint64_t seed : config.seeds) metrics.seeds.push_back(run_seed(config, seed, data, log));
  metrics.aggregate = aggregate_seeds(metrics.seeds);
  return metrics;
}

}  // namespace laser
