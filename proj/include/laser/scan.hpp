#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "laser/checkpoint.hpp"
#include "laser/maze.hpp"
#include "laser/quant.hpp"

namespace laser {

struct ScanOptions {
  std::vector<std::size_t> ranks{8, 16, 32, 64};
  std::vector<int> bit_depths{0};  // 0 = no quantization
  quant::ScaleMode scale_mode = quant::ScaleMode::MaxAbs;
  std::vector<model::Site> sites{model::kAllSites.begin(), model::kAllSites.end()};
};

struct ScanRow {
  std::string run;  // checkpoint stem relative to the scan root, or its path
  std::size_t step = 0;
  std::string site;
  std::size_t dim = 0;
  std::size_t rank = 0;
  int bits = 0;
  double fidelity = 1.0;  // cosine(X, Z_q Q^T), Z = X Q from the exact top-rank SVD
};

// For each checkpoint, runs the probe mazes through the full-storage forward,
// stacks each site's activations over cycles and scores the top-k SVD basis.
// Ranks above a site's dim are skipped. Needs at least two checkpoints.
std::vector<ScanRow> spectral_scan(const std::vector<Checkpoint>& checkpoints,
                                   const std::vector<maze::MazeInstance>& probe, const ScanOptions& options);

void write_scan_csv(const std::vector<ScanRow>& rows, const std::filesystem::path& path);

}  // namespace laser
