#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "laser/config.hpp"
#include "laser/memory.hpp"

namespace laser {

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double token_accuracy = 0.0;  // percent, training batch
  double lr = 0.0;
  double grad_norm = 0.0;
  bool skipped = false;
};

// One row per compressed site per step.
struct TraceRecord {
  std::size_t step = 0;
  std::string site;
  double fidelity = 1.0;
  std::size_t rank = 0;  // rank the batch was compressed to
  std::string event;
};

// Fidelity of the same batch under each reference basis at the active rank.
struct ShadowRecord {
  std::size_t step = 0;
  std::string site;
  std::size_t rank = 0;
  double active = 1.0;  // the run's own provider
  double oracle = 1.0;
  double static_basis = 1.0;
  double random = 1.0;
};

struct EvalRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // steps completed when evaluated
  double val_accuracy = 0.0;
  double solve_rate = 0.0;
};

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<TraceRecord> traces;
  std::vector<ShadowRecord> shadows;
  std::vector<EvalRecord> evals;
  double final_val_accuracy = 0.0;
  double final_solve_rate = 0.0;
  std::size_t skipped_steps = 0;
  std::size_t hard_resets = 0;
  MemoryReport memory;
  bool aborted = false;
  bool non_finite = false;  // abort was a NaN/Inf loss or gradient
  std::string abort_reason;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  std::size_t count = 0;
};
MeanStd mean_std(std::span<const double> values);

struct Aggregate {
  MeanStd val_accuracy;
  MeanStd solve_rate;
  MeanStd eligible_savings_pct;
  std::size_t aborted_seeds = 0;
};

struct RunMetrics {
  RunConfig config;
  std::vector<SeedMetrics> seeds;
  Aggregate aggregate;  // over seeds that completed
};

Aggregate aggregate_seeds(const std::vector<SeedMetrics>& seeds);

nlohmann::ordered_json to_json(const RunMetrics& metrics);

// metrics.json, config.toml, traces.csv, summary.txt, seed_<s>/traces.csv and
// plotdata/*.csv. Contents depend only on `metrics`, never on wall time.
void emit_metrics(const RunMetrics& metrics, const std::filesystem::path& dir);

// Table-1-shaped text over one or more runs (one row per run).
std::string summary_table(std::span<const RunMetrics> runs);

}  // namespace laser
