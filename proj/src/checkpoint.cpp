#include "laser/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "laser/binary_io.hpp"
#include "laser/error.hpp"

namespace laser {
namespace fs = std::filesystem;
namespace {

constexpr char kMagic[8] = {'L', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_checkpoint(const fs::path& stem, const model::ModelParams& params, const CheckpointManifest& manifest) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  io::ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic));
  const auto blocks = model::named_blocks(params);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, m] : blocks) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_string(name);
    w.put<std::uint64_t>(m->rows());
    w.put<std::uint64_t>(m->cols());
    for (double v : m->values()) w.put<double>(v);
  }
  io::write_file(with_ext(stem, ".bin").string(), w.bytes());

  nlohmann::ordered_json j;
  j["format"] = "LSRCKPT1";
  j["step"] = manifest.step;
  j["epoch"] = manifest.epoch;
  j["rng_seed"] = manifest.seed;
  j["dataset_path"] = manifest.dataset_path;
  j["config"] = manifest.config;
  std::ofstream out(with_ext(stem, ".json"), std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint manifest for '" + stem.string() + "'");
  out << j.dump(2) << '\n';
}

model::ModelConfig model_config_from_json(const nlohmann::ordered_json& config) {
  const auto& m = config.at("model");
  model::ModelConfig c;
  c.hidden_dim = m.at("hidden_dim").get<std::size_t>();
  c.num_heads = m.at("num_heads").get<std::size_t>();
  c.head_dim = m.at("head_dim").get<std::size_t>();
  c.mlp_inner = m.at("mlp_inner").get<std::size_t>();
  c.cycles = m.at("cycles").get<std::size_t>();
  c.seq_len = m.at("seq_len").get<std::size_t>();
  c.vocab_size = m.at("vocab_size").get<std::size_t>();
  c.rope_theta = m.at("rope_theta").get<double>();
  c.validate();
  return c;
}

Checkpoint load_checkpoint(const fs::path& stem) {
  Checkpoint ck;
  ck.stem = stem;
  std::ifstream in(with_ext(stem, ".json"));
  if (!in) throw Error(ErrorKind::Io, "missing checkpoint manifest '" + with_ext(stem, ".json").string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
    ck.manifest.config = j.at("config");
    ck.manifest.step = j.at("step").get<std::size_t>();
    ck.manifest.epoch = j.at("epoch").get<std::size_t>();
    ck.manifest.seed = j.at("rng_seed").get<std::uint64_t>();
    ck.manifest.dataset_path = j.at("dataset_path").get<std::string>();
    ck.model = model_config_from_json(ck.manifest.config);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, "checkpoint manifest '" + stem.string() + "': " + e.what());
  }

  const auto bytes = io::read_file(with_ext(stem, ".bin").string());
  io::ByteReader r(bytes);
  const auto magic = r.get_bytes(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw CorruptFileError(0, "bad checkpoint magic");

  // Shapes come from a freshly initialised model; every block must match.
  ck.params = model::init_params(ck.model, 0);
  auto blocks = model::named_blocks(ck.params);
  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint32_t>("block count");
  if (count != blocks.size()) throw CorruptFileError(count_at, "block count does not match the model");
  for (auto& block : blocks) {
    const std::size_t at = r.offset();
    const auto len = r.get<std::uint32_t>("name length");
    const auto name_bytes = r.get_bytes(len, "name");
    const std::string name(name_bytes.begin(), name_bytes.end());
    if (name != block.name) throw CorruptFileError(at, "expected block '" + block.name + "', found '" + name + "'");
    const std::size_t shape_at = r.offset();
    const auto rows = r.get<std::uint64_t>("rows");
    const auto cols = r.get<std::uint64_t>("cols");
    if (rows != block.value->rows() || cols != block.value->cols()) {
      throw CorruptFileError(shape_at, "shape mismatch for block '" + name + "'");
    }
    for (double& v : block.value->values()) v = r.get<double>("values");
  }
  if (r.remaining() != 0) throw CorruptFileError(r.offset(), "trailing bytes after last block");
  return ck;
}

std::vector<fs::path> find_checkpoints(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: '" + dir.string() + "'");
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".bin") continue;
    fs::path stem = entry.path();
    stem.replace_extension();
    if (fs::exists(with_ext(stem, ".json"))) out.push_back(stem);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace laser
