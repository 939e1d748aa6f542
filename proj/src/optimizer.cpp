#include "laser/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace laser {

AdamW::AdamW(const model::ModelParams& like, AdamWConfig config)
    : config_(config), first_(model::zeros_like(like)), second_(model::zeros_like(like)) {}

void AdamW::step(model::ModelParams& params, const model::ModelParams& grads, double lr) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  auto p = model::named_blocks(params);
  auto g = model::named_blocks(grads);
  auto m = model::named_blocks(first_);
  auto v = model::named_blocks(second_);
  for (std::size_t b = 0; b < p.size(); ++b) {
    double* pv = p[b].value->data();
    const double* gv = g[b].second->data();
    double* mv = m[b].value->data();
    double* vv = v[b].value->data();
    const double decay = p[b].decay ? config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p[b].value->size(); ++i) {
      mv[i] = config_.beta1 * mv[i] + (1.0 - config_.beta1) * gv[i];
      vv[i] = config_.beta2 * vv[i] + (1.0 - config_.beta2) * gv[i] * gv[i];
      const double update = (mv[i] / bias1) / (std::sqrt(vv[i] / bias2) + config_.eps);
      pv[i] -= lr * (update + decay * pv[i]);
    }
  }
}

double clip_global_norm(model::ModelParams& grads, double max_norm) {
  const double norm = std::sqrt(model::squared_norm(grads));
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& nb : model::named_blocks(grads)) *nb.value *= scale;
  }
  return norm;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double min_lr, std::size_t warmup) {
  if (step < warmup) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total_steps <= warmup) return base_lr;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup));
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace laser
