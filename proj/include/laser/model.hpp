#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "laser/matrix.hpp"
#include "laser/providers.hpp"

namespace laser::model {

struct ModelConfig {
  std::size_t hidden_dim = 64;
  std::size_t num_heads = 4;
  std::size_t head_dim = 16;
  std::size_t mlp_inner = 192;
  std::size_t cycles = 8;
  std::size_t seq_len = 49;
  std::size_t vocab_size = 5;
  double rope_theta = 10000.0;

  // Throws ErrorKind::InvalidConfig.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// D_h = 64, 4 heads, inner 192, 8 cycles over 7x7 grids.
ModelConfig desk_config();
// 512 hidden, 8 heads, inner 1536, 24 cycles, 11x11 grids. Shape tests only.
ModelConfig large_config();

enum class Site : std::size_t { AttnOut = 0, MlpConcat = 1, MlpInnerOut = 2, MlpOut = 3 };
inline constexpr std::array<Site, 4> kAllSites{Site::AttnOut, Site::MlpConcat, Site::MlpInnerOut, Site::MlpOut};

const char* site_name(Site site);  // "attn_out", "mlp_concat", ...
Site site_from_name(const std::string& name);
std::size_t site_dim(const ModelConfig& cfg, Site site);
// Dimension-tagged label in the style "mlp_384", "attn_64".
std::string site_label(const ModelConfig& cfg, Site site);

// Parameters of the single weight-tied block.
struct BlockParams {
  Matrix norm1;      // 1 x D
  Matrix wq, wk, wv; // D x D
  Matrix wo;         // D x D
  Matrix norm2;      // 1 x D
  Matrix w_gate_up;  // D x 2I, gate columns first
  Matrix w_down;     // I x D
};

struct ModelParams {
  Matrix embed;      // V x D
  BlockParams block;
  Matrix norm_out;   // 1 x D
  Matrix head;       // D x V
};

struct NamedBlock {
  std::string name;
  Matrix* value;
  bool decay;  // weight decay applies (false for norm gains)
};
std::vector<NamedBlock> named_blocks(ModelParams& p);
std::vector<std::pair<std::string, const Matrix*>> named_blocks(const ModelParams& p);
std::vector<NamedBlock> named_blocks(BlockParams& b);

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
// Same shapes, all zeros.
ModelParams zeros_like(const ModelParams& p);
BlockParams zeros_like(const BlockParams& b);
void add_into(ModelParams& acc, const ModelParams& g);
void add_into(BlockParams& acc, const BlockParams& g);
double squared_norm(const ModelParams& g);
std::vector<double> flatten(const ModelParams& g);
std::size_t parameter_count(const ModelParams& p);

struct CompressedPayload {
  Matrix z;
  BasisRef basis;
};

struct TapeEntry {
  Site site = Site::AttnOut;
  std::size_t cycle = 0;
  std::variant<Matrix, CompressedPayload> payload;

  bool compressed() const noexcept { return std::holds_alternative<CompressedPayload>(payload); }
  // Stored activation, or Z * Q^T for compressed entries.
  Matrix value() const;
  std::size_t stored_elements() const;
};

// Saved tensors that are never compressed.
struct CycleState {
  Matrix h1;        // norm1 output
  Matrix q, k, v;   // q and k after rotary encoding
  Matrix probs;     // (B * H * L) x L attention weights
  Matrix r;         // residual stream after attention
  Matrix h2;        // norm2 output
};

struct Tape {
  ModelConfig config;
  std::size_t batch = 0;
  std::vector<std::uint8_t> tokens;
  Matrix embedded;  // (B * L) x D token embeddings, injected every cycle
  Matrix head_in;   // final norm output
  std::vector<CycleState> cycles;
  std::vector<TapeEntry> entries;  // cycle-major, kAllSites order within a cycle

  const TapeEntry& entry(Site site, std::size_t cycle) const;
};

// Which sites are compressed and by what. nullptr keeps the site in full.
struct CompressionPlan {
  std::array<BasisProvider*, 4> providers{};
  BasisProvider*& operator[](Site s) { return providers[static_cast<std::size_t>(s)]; }
  BasisProvider* operator[](Site s) const { return providers[static_cast<std::size_t>(s)]; }
};

struct SiteOutcome {
  Site site;
  CompressionDecision decision;
};

struct ForwardResult {
  Matrix logits;  // (B * L) x V
  Tape tape;
  std::vector<SiteOutcome> outcomes;
  bool skip_backward = false;
};

// `tokens` holds `batch` sequences of seq_len ids back to back. `untied`, when
// non-empty, supplies a separate block per cycle (reference for weight tying).
ForwardResult forward_recursive(const ModelParams& params, const ModelConfig& cfg,
                                std::span<const std::uint8_t> tokens, std::size_t batch,
                                const CompressionPlan* plan = nullptr,
                                std::span<const BlockParams> untied = {});

// Reverse pass through all cycles. Site tensors are read back from the tape,
// so compressed sites contribute Jacobians evaluated at Z Q^T. `per_cycle`
// (optional) receives each cycle's block gradient separately.
ModelParams backward_with_reconstruction(const ModelParams& params, const Tape& tape, const Matrix& dlogits,
                                         std::vector<BlockParams>* per_cycle = nullptr,
                                         std::span<const BlockParams> untied = {});

enum class LossMask {
  FullGrid,   // every cell
  OpenCells,  // cells that are not walls in the input
};
LossMask loss_mask_from_name(const std::string& name);
const char* to_string(LossMask mask);

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
  std::size_t counted = 0;
  std::size_t correct = 0;
};

// Mean cross-entropy over counted cells and its gradient w.r.t. logits.
LossResult cross_entropy(const Matrix& logits, std::span<const std::uint8_t> inputs,
                         std::span<const std::uint8_t> targets, LossMask mask);

std::vector<std::uint8_t> argmax_tokens(const Matrix& logits);

struct Scores {
  double token_accuracy = 0.0;  // percent
  double solve_rate = 0.0;      // percent
  std::size_t cells = 0;
  std::size_t mazes = 0;
};
// Predictions and targets hold whole grids of `seq_len` cells back to back.
Scores score_predictions(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> targets,
                         std::span<const std::uint8_t> inputs, std::size_t seq_len, LossMask mask);

}  // namespace laser::model
