#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "laser/model.hpp"
#include "laser/tracker.hpp"

namespace laser {

enum class RunMode { Baseline, Laser, OracleSVD, StaticBasis, RandomProjection };
const char* to_string(RunMode mode);
RunMode run_mode_from_name(const std::string& name);

// Tracker settings for one site class. With rank_divisor > 0 the initial rank
// is site_dim / rank_divisor, otherwise tracker.initial_rank.
struct SiteTrackerSettings {
  TrackerConfig tracker;
  std::size_t rank_divisor = 8;

  std::size_t initial_rank(std::size_t site_dim) const;
};

struct RunConfig {
  model::ModelConfig model = model::desk_config();

  SiteTrackerSettings tracker;
  std::array<std::optional<SiteTrackerSettings>, 4> site_overrides;
  // Candidate sites; a site is compressed only if its dim >= min_compress_dim.
  std::vector<model::Site> sites{model::kAllSites.begin(), model::kAllSites.end()};
  std::size_t min_compress_dim = 256;

  RunMode mode = RunMode::Laser;
  std::vector<std::uint64_t> seeds{100};

  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 64;
  double lr = 1e-3;
  double min_lr = 1e-4;
  std::size_t warmup_steps = 0;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double grad_clip = 1.0;
  model::LossMask loss_mask = model::LossMask::FullGrid;
  std::size_t max_steps = 0;  // 0 = no cap; otherwise stop after this many steps

  std::string dataset_path = "data/mazes.bin";
  std::size_t maze_size = 7;
  std::size_t train_count = 2500;
  std::size_t val_count = 500;

  std::string output_dir = "runs/default";
  std::size_t shadow_interval = 0;     // steps between baseline-fidelity probes; 0 = off
  std::size_t checkpoint_every = 1;    // epochs; 0 = off
  std::size_t bytes_per_elem = 2;      // bf16 accounting by default

  const SiteTrackerSettings& settings_for(model::Site site) const;
  // Sites that get a provider in compressed modes.
  std::vector<model::Site> eligible_sites() const;
  // Throws ErrorKind::InvalidConfig.
  void validate() const;
};

// Flat `key = value` lines under [section] headers; '#' starts a comment.
// Values are numbers, bare or quoted strings, or comma lists (optionally in
// brackets). Unknown sections or keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);
nlohmann::ordered_json to_json(const RunConfig& config);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace laser
