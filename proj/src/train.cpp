#include "laser/train.hpp"

#include <cmath>
#include <numeric>

#include "laser/error.hpp"

namespace laser {

TokenBatch make_batch(const std::vector<maze::MazeInstance>& data, std::span<const std::size_t> indices) {
  TokenBatch b;
  b.size = indices.size();
  for (std::size_t i : indices) {
    b.inputs.insert(b.inputs.end(), data.at(i).input.begin(), data.at(i).input.end());
    b.targets.insert(b.targets.end(), data.at(i).target.begin(), data.at(i).target.end());
  }
  return b;
}

StepResult train_step(model::ModelParams& params, AdamW& optimizer, const model::ModelConfig& cfg,
                      const TokenBatch& batch, const model::CompressionPlan* plan, const StepOptions& options) {
  model::ForwardResult fwd = model::forward_recursive(params, cfg, batch.inputs, batch.size, plan);
  const model::LossResult loss = model::cross_entropy(fwd.logits, batch.inputs, batch.targets, options.mask);

  StepResult out;
  out.loss = loss.loss;
  out.token_accuracy =
      loss.counted ? 100.0 * static_cast<double>(loss.correct) / static_cast<double>(loss.counted) : 0.0;
  out.outcomes = std::move(fwd.outcomes);
  if (fwd.skip_backward) {
    out.skipped = true;
    return out;
  }

  model::ModelParams grads = model::backward_with_reconstruction(params, fwd.tape, loss.dlogits);
  out.grad_norm = clip_global_norm(grads, options.grad_clip);
  if (!std::isfinite(out.grad_norm)) throw Error(ErrorKind::NonFiniteLoss, "gradient norm is not finite");
  optimizer.step(params, grads, options.lr);
  return out;
}

model::Scores evaluate(const model::ModelParams& params, const model::ModelConfig& cfg,
                       const std::vector<maze::MazeInstance>& data, std::size_t batch_size, model::LossMask mask) {
  std::vector<std::uint8_t> predictions, targets, inputs;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    const TokenBatch b = make_batch(data, std::span(idx).subspan(begin, count));
    const auto fwd = model::forward_recursive(params, cfg, b.inputs, b.size);
    const auto pred = model::argmax_tokens(fwd.logits);
    predictions.insert(predictions.end(), pred.begin(), pred.end());
    targets.insert(targets.end(), b.targets.begin(), b.targets.end());
    inputs.insert(inputs.end(), b.inputs.begin(), b.inputs.end());
  }
  return model::score_predictions(predictions, targets, inputs, cfg.seq_len, mask);
}

}  // namespace laser
