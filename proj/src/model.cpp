#include "laser/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "laser/error.hpp"
#include "laser/maze.hpp"

namespace laser::model {
namespace {

constexpr double kNormEps = 1e-6;

// y = x / rms(x) * gain, row by row.
Matrix rmsnorm(const Matrix& x, const Matrix& gain) {
  const std::size_t d = x.cols();
  Matrix y(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.data() + r * d;
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += xr[j] * xr[j];
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
    double* yr = y.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) yr[j] = xr[j] * inv * gain.data()[j];
  }
  return y;
}

// Returns dx; accumulates the gain gradient into dgain.
Matrix rmsnorm_backward(const Matrix& x, const Matrix& gain, const Matrix& dy, Matrix& dgain) {
  const std::size_t d = x.cols();
  Matrix dx(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.data() + r * d;
    const double* dyr = dy.data() + r * d;
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += xr[j] * xr[j];
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
    double proj = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain.data()[j] += dyr[j] * xr[j] * inv;
      proj += gain.data()[j] * dyr[j] * xr[j];
    }
    const double coef = inv * inv * inv * proj / static_cast<double>(d);
    double* dxr = dx.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dxr[j] = inv * gain.data()[j] * dyr[j] - coef * xr[j];
  }
  return dx;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix swiglu(const Matrix& gate_up, std::size_t inner) {
  Matrix m(gate_up.rows(), inner);
  for (std::size_t r = 0; r < gate_up.rows(); ++r) {
    const double* g = gate_up.data() + r * 2 * inner;
    const double* up = g + inner;
    double* out = m.data() + r * inner;
    for (std::size_t j = 0; j < inner; ++j) out[j] = g[j] * sigmoid(g[j]) * up[j];
  }
  return m;
}

Matrix swiglu_backward(const Matrix& gate_up, const Matrix& dm) {
  const std::size_t inner = dm.cols();
  Matrix dgu(gate_up.rows(), 2 * inner);
  for (std::size_t r = 0; r < gate_up.rows(); ++r) {
    const double* g = gate_up.data() + r * 2 * inner;
    const double* up = g + inner;
    const double* d = dm.data() + r * inner;
    double* dg = dgu.data() + r * 2 * inner;
    double* dup = dg + inner;
    for (std::size_t j = 0; j < inner; ++j) {
      const double s = sigmoid(g[j]);
      dg[j] = d[j] * up[j] * s * (1.0 + g[j] * (1.0 - s));
      dup[j] = d[j] * g[j] * s;
    }
  }
  return dgu;
}

// Rotary tables indexed [position][pair].
struct Rope {
  std::size_t pairs = 0;
  std::vector<double> cos, sin;

  Rope(const ModelConfig& cfg) : pairs(cfg.head_dim / 2), cos(cfg.seq_len * pairs), sin(cfg.seq_len * pairs) {
    for (std::size_t pos = 0; pos < cfg.seq_len; ++pos) {
      for (std::size_t i = 0; i < pairs; ++i) {
        const double freq = std::pow(cfg.rope_theta, -2.0 * static_cast<double>(i) / static_cast<double>(cfg.head_dim));
        const double angle = static_cast<double>(pos) * freq;
        cos[pos * pairs + i] = std::cos(angle);
        sin[pos * pairs + i] = std::sin(angle);
      }
    }
  }

  // direction = +1 rotates forward; -1 applies the transpose (used in backward).
  void apply(Matrix& m, const ModelConfig& cfg, double direction) const {
    for (std::size_t row = 0; row < m.rows(); ++row) {
      const std::size_t pos = row % cfg.seq_len;
      double* x = m.data() + row * m.cols();
      for (std::size_t h = 0; h < cfg.num_heads; ++h) {
        double* xh = x + h * cfg.head_dim;
        for (std::size_t i = 0; i < pairs; ++i) {
          const double c = cos[pos * pairs + i], s = direction * sin[pos * pairs + i];
          const double a = xh[2 * i], b = xh[2 * i + 1];
          xh[2 * i] = a * c - b * s;
          xh[2 * i + 1] = a * s + b * c;
        }
      }
    }
  }
};

// Non-causal multi-head attention over each sequence of the batch.
Matrix attention(const ModelConfig& cfg, std::size_t batch, const Matrix& q, const Matrix& k, const Matrix& v,
                 Matrix& probs) {
  const std::size_t L = cfg.seq_len, H = cfg.num_heads, hd = cfg.head_dim, D = cfg.hidden_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  probs = Matrix(batch * H * L, L);
  Matrix ctx(batch * L, D);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < L; ++i) {
        const double* qi = q.data() + (b * L + i) * D + off;
        double* p = probs.data() + ((b * H + h) * L + i) * L;
        double top = -INFINITY;
        for (std::size_t j = 0; j < L; ++j) {
          const double* kj = k.data() + (b * L + j) * D + off;
          double s = 0.0;
          for (std::size_t t = 0; t < hd; ++t) s += qi[t] * kj[t];
          p[j] = s * scale;
          top = std::max(top, p[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          p[j] = std::exp(p[j] - top);
          total += p[j];
        }
        double* out = ctx.data() + (b * L + i) * D + off;
        for (std::size_t j = 0; j < L; ++j) {
          p[j] /= total;
          const double* vj = v.data() + (b * L + j) * D + off;
          for (std::size_t t = 0; t < hd; ++t) out[t] += p[j] * vj[t];
        }
      }
    }
  }
  return ctx;
}

void attention_backward(const ModelConfig& cfg, std::size_t batch, const CycleState& s, const Matrix& dctx,
                        Matrix& dq, Matrix& dk, Matrix& dv) {
  const std::size_t L = cfg.seq_len, H = cfg.num_heads, hd = cfg.head_dim, D = cfg.hidden_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  dq = Matrix(batch * L, D);
  dk = Matrix(batch * L, D);
  dv = Matrix(batch * L, D);
  std::vector<double> dp(L);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < L; ++i) {
        const double* p = s.probs.data() + ((b * H + h) * L + i) * L;
        const double* gi = dctx.data() + (b * L + i) * D + off;
        double weighted = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          const double* vj = s.v.data() + (b * L + j) * D + off;
          double* dvj = dv.data() + (b * L + j) * D + off;
          double acc = 0.0;
          for (std::size_t t = 0; t < hd; ++t) {
            acc += gi[t] * vj[t];
            dvj[t] += p[j] * gi[t];
          }
          dp[j] = acc;
          weighted += acc * p[j];
        }
        const double* qi = s.q.data() + (b * L + i) * D + off;
        double* dqi = dq.data() + (b * L + i) * D + off;
        for (std::size_t j = 0; j < L; ++j) {
          const double dscore = p[j] * (dp[j] - weighted) * scale;
          const double* kj = s.k.data() + (b * L + j) * D + off;
          double* dkj = dk.data() + (b * L + j) * D + off;
          for (std::size_t t = 0; t < hd; ++t) {
            dqi[t] += dscore * kj[t];
            dkj[t] += dscore * qi[t];
          }
        }
      }
    }
  }
}

void check_tokens(const ModelConfig& cfg, std::span<const std::uint8_t> tokens, std::size_t batch) {
  if (batch == 0 || tokens.size() != batch * cfg.seq_len) {
    throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(batch) + " x " + std::to_string(cfg.seq_len) +
                                              " tokens, got " + std::to_string(tokens.size()));
  }
  for (std::uint8_t t : tokens) {
    if (t >= cfg.vocab_size) throw Error(ErrorKind::ShapeMismatch, "token id out of vocabulary");
  }
}

void check_block(const ModelConfig& cfg, const BlockParams& b) {
  const std::size_t D = cfg.hidden_dim, I = cfg.mlp_inner;
  const bool ok = b.norm1.rows() == 1 && b.norm1.cols() == D && b.wq.rows() == D && b.wq.cols() == D &&
                  b.wk.rows() == D && b.wk.cols() == D && b.wv.rows() == D && b.wv.cols() == D && b.wo.rows() == D &&
                  b.wo.cols() == D && b.norm2.cols() == D && b.w_gate_up.rows() == D &&
                  b.w_gate_up.cols() == 2 * I && b.w_down.rows() == I && b.w_down.cols() == D;
  if (!ok) throw Error(ErrorKind::ShapeMismatch, "block parameters do not match model config");
}

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, "model: " + msg); };
  if (hidden_dim == 0 || num_heads == 0 || head_dim == 0) fail("dimensions must be positive");
  if (hidden_dim != num_heads * head_dim) fail("hidden_dim must equal num_heads * head_dim");
  if (head_dim % 2 != 0) fail("head_dim must be even for rotary encoding");
  if (mlp_inner != 3 * hidden_dim) fail("mlp_inner must be 3 * hidden_dim");
  if (vocab_size != maze::kVocabSize) fail("vocab_size must be 5");
  if (cycles == 0) fail("cycles must be >= 1");
  if (seq_len == 0) fail("seq_len must be >= 1");
  if (!(rope_theta > 1.0)) fail("rope_theta must be > 1");
}

ModelConfig desk_config() { return ModelConfig{}; }

ModelConfig large_config() {
  ModelConfig c;
  c.hidden_dim = 512;
  c.num_heads = 8;
  c.head_dim = 64;
  c.mlp_inner = 1536;
  c.cycles = 24;
  c.seq_len = 121;
  return c;
}

const char* site_name(Site site) {
  switch (site) {
    case Site::AttnOut: return "attn_out";
    case Site::MlpConcat: return "mlp_concat";
    case Site::MlpInnerOut: return "mlp_inner_out";
    case Site::MlpOut: return "mlp_out";
  }
  return "unknown";
}

Site site_from_name(const std::string& name) {
  for (Site s : kAllSites) {
    if (name == site_name(s)) return s;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown capture site '" + name + "'");
}

std::size_t site_dim(const ModelConfig& cfg, Site site) {
  switch (site) {
    case Site::AttnOut:
    case Site::MlpOut: return cfg.hidden_dim;
    case Site::MlpConcat: return 2 * cfg.mlp_inner;
    case Site::MlpInnerOut: return cfg.mlp_inner;
  }
  return 0;
}

std::string site_label(const ModelConfig& cfg, Site site) {
  return std::string(site == Site::AttnOut ? "attn_" : "mlp_") + std::to_string(site_dim(cfg, site));
}

std::vector<NamedBlock> named_blocks(BlockParams& b) {
  return {{"block.norm1", &b.norm1, false}, {"block.wq", &b.wq, true},
          {"block.wk", &b.wk, true},       {"block.wv", &b.wv, true},
          {"block.wo", &b.wo, true},       {"block.norm2", &b.norm2, false},
          {"block.w_gate_up", &b.w_gate_up, true}, {"block.w_down", &b.w_down, true}};
}

std::vector<NamedBlock> named_blocks(ModelParams& p) {
  std::vector<NamedBlock> out{{"embed", &p.embed, true}};
  for (NamedBlock& nb : named_blocks(p.block)) out.push_back(nb);
  out.push_back({"norm_out", &p.norm_out, false});
  out.push_back({"head", &p.head, true});
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> named_blocks(const ModelParams& p) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (const NamedBlock& nb : named_blocks(const_cast<ModelParams&>(p))) out.emplace_back(nb.name, nb.value);
  return out;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t D = cfg.hidden_dim, I = cfg.mlp_inner, V = cfg.vocab_size;
  const double fan_d = 1.0 / std::sqrt(static_cast<double>(D));
  const double fan_i = 1.0 / std::sqrt(static_cast<double>(I));
  // Residual-branch outputs shrink with depth so the unrolled stream stays O(1).
  const double depth = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.cycles));
  ModelParams p;
  p.embed = gaussian(V, D, 1.0, rng);
  p.block.norm1 = Matrix(1, D, 1.0);
  p.block.wq = gaussian(D, D, fan_d, rng);
  p.block.wk = gaussian(D, D, fan_d, rng);
  p.block.wv = gaussian(D, D, fan_d, rng);
  p.block.wo = gaussian(D, D, fan_d * depth, rng);
  p.block.norm2 = Matrix(1, D, 1.0);
  p.block.w_gate_up = gaussian(D, 2 * I, fan_d, rng);
  p.block.w_down = gaussian(I, D, fan_i * depth, rng);
  p.norm_out = Matrix(1, D, 1.0);
  p.head = gaussian(D, V, fan_d, rng);
  return p;
}

BlockParams zeros_like(const BlockParams& b) {
  BlockParams z;
  z.norm1 = Matrix(b.norm1.rows(), b.norm1.cols());
  z.wq = Matrix(b.wq.rows(), b.wq.cols());
  z.wk = Matrix(b.wk.rows(), b.wk.cols());
  z.wv = Matrix(b.wv.rows(), b.wv.cols());
  z.wo = Matrix(b.wo.rows(), b.wo.cols());
  z.norm2 = Matrix(b.norm2.rows(), b.norm2.cols());
  z.w_gate_up = Matrix(b.w_gate_up.rows(), b.w_gate_up.cols());
  z.w_down = Matrix(b.w_down.rows(), b.w_down.cols());
  return z;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.embed = Matrix(p.embed.rows(), p.embed.cols());
  z.block = zeros_like(p.block);
  z.norm_out = Matrix(p.norm_out.rows(), p.norm_out.cols());
  z.head = Matrix(p.head.rows(), p.head.cols());
  return z;
}

void add_into(BlockParams& acc, const BlockParams& g) {
  auto dst = named_blocks(acc);
  auto src = named_blocks(const_cast<BlockParams&>(g));
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value += *src[i].value;
}

void add_into(ModelParams& acc, const ModelParams& g) {
  auto dst = named_blocks(acc);
  auto src = named_blocks(g);
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value += *src[i].second;
}

double squared_norm(const ModelParams& g) {
  double s = 0.0;
  for (const auto& [name, m] : named_blocks(g)) {
    for (double v : m->values()) s += v * v;
  }
  return s;
}

std::vector<double> flatten(const ModelParams& g) {
  std::vector<double> out;
  for (const auto& [name, m] : named_blocks(g)) out.insert(out.end(), m->values().begin(), m->values().end());
  return out;
}

std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto& [name, m] : named_blocks(p)) n += m->size();
  return n;
}

Matrix TapeEntry::value() const {
  if (const auto* full = std::get_if<Matrix>(&payload)) return *full;
  const auto& c = std::get<CompressedPayload>(payload);
  return matmul_nt(c.z, *c.basis);
}

std::size_t TapeEntry::stored_elements() const {
  if (const auto* full = std::get_if<Matrix>(&payload)) return full->size();
  return std::get<CompressedPayload>(payload).z.size();
}

const TapeEntry& Tape::entry(Site site, std::size_t cycle) const {
  const std::size_t idx = cycle * kAllSites.size() + static_cast<std::size_t>(site);
  if (idx >= entries.size() || entries[idx].site != site || entries[idx].cycle != cycle) {
    throw Error(ErrorKind::TapeMismatch, std::string("no tape entry for ") + site_name(site) + " cycle " +
                                             std::to_string(cycle));
  }
  return entries[idx];
}

ForwardResult forward_recursive(const ModelParams& params, const ModelConfig& cfg,
                                std::span<const std::uint8_t> tokens, std::size_t batch,
                                const CompressionPlan* plan, std::span<const BlockParams> untied) {
  cfg.validate();
  check_tokens(cfg, tokens, batch);
  if (!untied.empty() && untied.size() != cfg.cycles) {
    throw Error(ErrorKind::ShapeMismatch, "untied reference needs one block per cycle");
  }
  check_block(cfg, params.block);
  for (const BlockParams& b : untied) check_block(cfg, b);

  const std::size_t rows = batch * cfg.seq_len, D = cfg.hidden_dim;
  const Rope rope(cfg);

  ForwardResult out;
  Tape& tape = out.tape;
  tape.config = cfg;
  tape.batch = batch;
  tape.tokens.assign(tokens.begin(), tokens.end());
  tape.embedded = Matrix(rows, D);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto src = params.embed.row(tokens[r]);
    std::copy(src.begin(), src.end(), tape.embedded.row(r).begin());
  }

  std::array<std::vector<Matrix>, 4> site_values;
  Matrix z;
  for (std::size_t c = 0; c < cfg.cycles; ++c) {
    const BlockParams& blk = untied.empty() ? params.block : untied[c];
    CycleState s;
    const Matrix u = c == 0 ? tape.embedded : z + tape.embedded;
    s.h1 = rmsnorm(u, blk.norm1);
    s.q = matmul(s.h1, blk.wq);
    s.k = matmul(s.h1, blk.wk);
    s.v = matmul(s.h1, blk.wv);
    rope.apply(s.q, cfg, 1.0);
    rope.apply(s.k, cfg, 1.0);
    Matrix ctx = attention(cfg, batch, s.q, s.k, s.v, s.probs);
    s.r = u + matmul(ctx, blk.wo);
    s.h2 = rmsnorm(s.r, blk.norm2);
    Matrix gate_up = matmul(s.h2, blk.w_gate_up);
    Matrix inner = swiglu(gate_up, cfg.mlp_inner);
    z = s.r + matmul(inner, blk.w_down);

    site_values[static_cast<std::size_t>(Site::AttnOut)].push_back(std::move(ctx));
    site_values[static_cast<std::size_t>(Site::MlpConcat)].push_back(std::move(gate_up));
    site_values[static_cast<std::size_t>(Site::MlpInnerOut)].push_back(std::move(inner));
    site_values[static_cast<std::size_t>(Site::MlpOut)].push_back(z);
    tape.cycles.push_back(std::move(s));
  }
  tape.head_in = rmsnorm(z, params.norm_out);
  out.logits = matmul(tape.head_in, params.head);

  // One provider call per site on all cycles stacked, so every cycle of this
  // batch shares the basis the provider held on entry.
  std::array<std::optional<CompressionDecision>, 4> decisions;
  for (Site site : kAllSites) {
    BasisProvider* provider = plan ? (*plan)[site] : nullptr;
    if (!provider) continue;
    CompressionDecision d = provider->process(vstack(site_values[static_cast<std::size_t>(site)]));
    out.skip_backward = out.skip_backward || d.skip_backward;
    out.outcomes.push_back({site, d});
    decisions[static_cast<std::size_t>(site)] = std::move(d);
  }

  for (std::size_t c = 0; c < cfg.cycles; ++c) {
    for (Site site : kAllSites) {
      const std::size_t si = static_cast<std::size_t>(site);
      TapeEntry e{site, c, std::move(site_values[si][c])};
      const auto& d = decisions[si];
      // A full-rank basis is lossless, so keep the activation itself.
      if (d && d->basis->cols() < d->basis->rows()) {
        e.payload = CompressedPayload{d->z.row_block(c * rows, rows), d->basis};
      }
      tape.entries.push_back(std::move(e));
    }
  }
  return out;
}

ModelParams backward_with_reconstruction(const ModelParams& params, const Tape& tape, const Matrix& dlogits,
                                         std::vector<BlockParams>* per_cycle, std::span<const BlockParams> untied) {
  const ModelConfig& cfg = tape.config;
  const std::size_t rows = tape.batch * cfg.seq_len;
  if (dlogits.rows() != rows || dlogits.cols() != cfg.vocab_size) {
    throw Error(ErrorKind::TapeMismatch, "upstream gradient shape does not match the tape");
  }
  if (tape.cycles.size() != cfg.cycles || tape.entries.size() != cfg.cycles * kAllSites.size()) {
    throw Error(ErrorKind::TapeMismatch, "tape is incomplete");
  }
  if (params.embed.cols() != cfg.hidden_dim || params.head.cols() != cfg.vocab_size) {
    throw Error(ErrorKind::TapeMismatch, "parameters do not match the tape's config");
  }
  if (!untied.empty() && untied.size() != cfg.cycles) {
    throw Error(ErrorKind::TapeMismatch, "untied reference needs one block per cycle");
  }
  const Rope rope(cfg);

  ModelParams grads = zeros_like(params);
  if (per_cycle) per_cycle->assign(cfg.cycles, zeros_like(params.block));

  grads.head = matmul_tn(tape.head_in, dlogits);
  Matrix dz = rmsnorm_backward(tape.entry(Site::MlpOut, cfg.cycles - 1).value(), params.norm_out,
                               matmul_nt(dlogits, params.head), grads.norm_out);
  Matrix de(rows, cfg.hidden_dim);

  for (std::size_t c = cfg.cycles; c-- > 0;) {
    const BlockParams& blk = untied.empty() ? params.block : untied[c];
    const CycleState& s = tape.cycles[c];
    BlockParams g = zeros_like(params.block);

    // MLP branch: z = r + swiglu(h2 W_gu) W_down
    g.w_down = matmul_tn(tape.entry(Site::MlpInnerOut, c).value(), dz);
    const Matrix dgu = swiglu_backward(tape.entry(Site::MlpConcat, c).value(), matmul_nt(dz, blk.w_down));
    g.w_gate_up = matmul_tn(s.h2, dgu);
    Matrix dr = dz + rmsnorm_backward(s.r, blk.norm2, matmul_nt(dgu, blk.w_gate_up), g.norm2);

    // Attention branch: r = u + attn(h1) W_o
    g.wo = matmul_tn(tape.entry(Site::AttnOut, c).value(), dr);
    Matrix dq, dk, dv;
    attention_backward(cfg, tape.batch, s, matmul_nt(dr, blk.wo), dq, dk, dv);
    rope.apply(dq, cfg, -1.0);
    rope.apply(dk, cfg, -1.0);
    g.wq = matmul_tn(s.h1, dq);
    g.wk = matmul_tn(s.h1, dk);
    g.wv = matmul_tn(s.h1, dv);
    Matrix dh1 = matmul_nt(dq, blk.wq);
    dh1 += matmul_nt(dk, blk.wk);
    dh1 += matmul_nt(dv, blk.wv);

    const Matrix u = c == 0 ? tape.embedded : tape.entry(Site::MlpOut, c - 1).value() + tape.embedded;
    dz = dr + rmsnorm_backward(u, blk.norm1, dh1, g.norm1);
    de += dz;

    add_into(grads.block, g);
    if (per_cycle) (*per_cycle)[c] = std::move(g);
  }

  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = grads.embed.row(tape.tokens[r]);
    const auto src = de.row(r);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  return grads;
}

LossMask loss_mask_from_name(const std::string& name) {
  if (name == "full") return LossMask::FullGrid;
  if (name == "open") return LossMask::OpenCells;
  throw Error(ErrorKind::InvalidConfig, "loss mask must be 'full' or 'open', got '" + name + "'");
}

const char* to_string(LossMask mask) { return mask == LossMask::FullGrid ? "full" : "open"; }

namespace {
bool counted(LossMask mask, std::uint8_t input) { return mask == LossMask::FullGrid || input != maze::Wall; }
}  // namespace

LossResult cross_entropy(const Matrix& logits, std::span<const std::uint8_t> inputs,
                         std::span<const std::uint8_t> targets, LossMask mask) {
  if (logits.rows() != targets.size() || inputs.size() != targets.size()) {
    throw Error(ErrorKind::ShapeMismatch, "logits, inputs and targets disagree in length");
  }
  LossResult out;
  out.dlogits = Matrix(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (counted(mask, inputs[r])) ++out.counted;
  }
  if (out.counted == 0) return out;
  const double weight = 1.0 / static_cast<double>(out.counted);
  std::vector<double> p(logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (!counted(mask, inputs[r])) continue;
    const auto row = logits.row(r);
    const std::size_t best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == targets[r]) ++out.correct;
    const double top = row[best];
    double total = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) total += (p[j] = std::exp(row[j] - top));
    out.loss -= (row[targets[r]] - top - std::log(total)) * weight;
    auto d = out.dlogits.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) d[j] = (p[j] / total - (j == targets[r] ? 1.0 : 0.0)) * weight;
  }
  if (!std::isfinite(out.loss)) throw Error(ErrorKind::NonFiniteLoss, "cross-entropy is not finite");
  return out;
}

std::vector<std::uint8_t> argmax_tokens(const Matrix& logits) {
  std::vector<std::uint8_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<std::uint8_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Scores score_predictions(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> targets,
                         std::span<const std::uint8_t> inputs, std::size_t seq_len, LossMask mask) {
  if (predictions.size() != targets.size() || inputs.size() != targets.size() || seq_len == 0 ||
      targets.size() % seq_len != 0) {
    throw Error(ErrorKind::ShapeMismatch, "predictions and targets must be whole grids of equal size");
  }
  Scores s;
  s.mazes = targets.size() / seq_len;
  std::size_t correct = 0, solved = 0;
  for (std::size_t m = 0; m < s.mazes; ++m) {
    bool all = true;
    for (std::size_t i = m * seq_len; i < (m + 1) * seq_len; ++i) {
      if (!counted(mask, inputs[i])) continue;
      ++s.cells;
      if (predictions[i] == targets[i]) {
        ++correct;
      } else {
        all = false;
      }
    }
    if (all) ++solved;
  }
  if (s.cells > 0) s.token_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(s.cells);
  if (s.mazes > 0) s.solve_rate = 100.0 * static_cast<double>(solved) / static_cast<double>(s.mazes);
  return s;
}

}  // namespace laser::model
