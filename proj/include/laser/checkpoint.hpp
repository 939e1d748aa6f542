#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "laser/model.hpp"

namespace laser {

// A checkpoint is a pair of files sharing a stem: <stem>.bin holds the named
// parameter blocks, <stem>.json the manifest.
//
// .bin layout (little-endian):
//   "LSRCKPT1"  8 bytes
//   u32 block count
//   per block: u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64
struct CheckpointManifest {
  nlohmann::ordered_json config;  // run config as JSON
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::string dataset_path;  // absolute
};

struct Checkpoint {
  std::filesystem::path stem;
  model::ModelConfig model;
  model::ModelParams params;
  CheckpointManifest manifest;
};

void save_checkpoint(const std::filesystem::path& stem, const model::ModelParams& params,
                     const CheckpointManifest& manifest);
// Throws CorruptFileError on a malformed .bin, ErrorKind::Io if a file is missing.
Checkpoint load_checkpoint(const std::filesystem::path& stem);
model::ModelConfig model_config_from_json(const nlohmann::ordered_json& config);

// Stems of every checkpoint under `dir`, sorted by path.
std::vector<std::filesystem::path> find_checkpoints(const std::filesystem::path& dir);

}  // namespace laser
