#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "laser/maze.hpp"
#include "laser/model.hpp"
#include "laser/optimizer.hpp"

namespace laser {

// Inputs and targets of several mazes laid out back to back.
struct TokenBatch {
  std::size_t size = 0;
  std::vector<std::uint8_t> inputs;
  std::vector<std::uint8_t> targets;
};

TokenBatch make_batch(const std::vector<maze::MazeInstance>& data, std::span<const std::size_t> indices);

struct StepOptions {
  double lr = 1e-3;
  double grad_clip = 1.0;
  model::LossMask mask = model::LossMask::FullGrid;
};

struct StepResult {
  double loss = 0.0;
  double token_accuracy = 0.0;  // percent, on the training batch
  double grad_norm = 0.0;       // before clipping; 0 when skipped
  bool skipped = false;         // a site signalled skip_backward; no update made
  std::vector<model::SiteOutcome> outcomes;
};

// Forward, loss, backward with reconstruction, clip, AdamW. Throws
// ErrorKind::NonFiniteLoss if the loss or gradient is not finite.
StepResult train_step(model::ModelParams& params, AdamW& optimizer, const model::ModelConfig& cfg,
                      const TokenBatch& batch, const model::CompressionPlan* plan, const StepOptions& options);

// Full-storage forward over `data` in chunks of `batch_size`.
model::Scores evaluate(const model::ModelParams& params, const model::ModelConfig& cfg,
                       const std::vector<maze::MazeInstance>& data, std::size_t batch_size,
                       model::LossMask mask = model::LossMask::FullGrid);

}  // namespace laser
