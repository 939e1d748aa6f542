#pragma once

#include <cstddef>

#include "laser/model.hpp"

namespace laser {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Adam with decoupled weight decay. Norm gains are not decayed.
class AdamW {
 public:
  AdamW(const model::ModelParams& like, AdamWConfig config);

  void step(model::ModelParams& params, const model::ModelParams& grads, double lr);
  std::size_t steps() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return config_; }

 private:
  AdamWConfig config_;
  model::ModelParams first_;
  model::ModelParams second_;
  std::size_t steps_ = 0;
};

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(model::ModelParams& grads, double max_norm);

// Cosine decay from base_lr to min_lr over total_steps after a linear warmup.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double min_lr, std::size_t warmup = 0);

}  // namespace laser
