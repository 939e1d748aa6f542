#include "laser/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "laser/error.hpp"

namespace laser {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_list(std::string s) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw Error(ErrorKind::InvalidConfig, "unterminated list '" + s + "'");
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& raw, const std::string& key) {
  const std::string s = unquote(trim(raw));
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::InvalidConfig, "key '" + key + "': cannot parse '" + s + "' as a number");
  }
  return value;
}

bool parse_bool(const std::string& raw, const std::string& key) {
  const std::string s = unquote(trim(raw));
  if (s == "true") return true;
  if (s == "false") return false;
  throw Error(ErrorKind::InvalidConfig, "key '" + key + "': expected true or false");
}

using Setter = std::function<void(const std::string&)>;

void tracker_keys(std::map<std::string, Setter>& keys, SiteTrackerSettings& t, const std::string& prefix) {
  auto size_key = [&](const char* name, std::size_t& field) {
    keys[prefix + name] = [&field, k = prefix + name](const std::string& v) { field = parse_number<std::size_t>(v, k); };
  };
  size_key("initial_rank", t.tracker.initial_rank);
  size_key("rank_divisor", t.rank_divisor);
  size_key("patience", t.tracker.patience);
  size_key("expansion_size", t.tracker.expansion_size);
  size_key("max_rank", t.tracker.max_rank);
  size_key("power_steps", t.tracker.power_steps);
  keys[prefix + "fidelity_threshold"] = [&t, k = prefix + "fidelity_threshold"](const std::string& v) {
    t.tracker.fidelity_threshold = parse_number<double>(v, k);
  };
}

}  // namespace

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Baseline: return "baseline";
    case RunMode::Laser: return "laser";
    case RunMode::OracleSVD: return "oracle";
    case RunMode::StaticBasis: return "static";
    case RunMode::RandomProjection: return "random";
  }
  return "unknown";
}

RunMode run_mode_from_name(const std::string& name) {
  for (RunMode m : {RunMode::Baseline, RunMode::Laser, RunMode::OracleSVD, RunMode::StaticBasis,
                    RunMode::RandomProjection}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidConfig,
              "unknown mode '" + name + "' (expected baseline, laser, oracle, static or random)");
}

std::size_t SiteTrackerSettings::initial_rank(std::size_t site_dim) const {
  if (rank_divisor == 0) return std::min(tracker.initial_rank, site_dim);
  return std::max<std::size_t>(1, site_dim / rank_divisor);
}

const SiteTrackerSettings& RunConfig::settings_for(model::Site site) const {
  const auto& o = site_overrides[static_cast<std::size_t>(site)];
  return o ? *o : tracker;
}

std::vector<model::Site> RunConfig::eligible_sites() const {
  std::vector<model::Site> out;
  if (mode == RunMode::Baseline) return out;
  for (model::Site s : sites) {
    if (model::site_dim(model, s) >= min_compress_dim) out.push_back(s);
  }
  return out;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  model.validate();
  if (seeds.empty()) fail("run.seeds must not be empty");
  if (epochs == 0) fail("train.epochs must be >= 1");
  if (batch_size == 0 || eval_batch_size == 0) fail("batch sizes must be >= 1");
  if (!(lr >= 0.0) || !(min_lr >= 0.0)) fail("learning rates must be >= 0");
  if (!(grad_clip > 0.0)) fail("train.grad_clip must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (maze_size < 5 || maze_size % 2 == 0) fail("data.maze_size must be odd and >= 5");
  if (model.seq_len != maze_size * maze_size) fail("model.seq_len must equal data.maze_size squared");
  if (train_count == 0 || val_count == 0) fail("data.train_count and data.val_count must be >= 1");
  if (bytes_per_elem == 0) fail("run.bytes_per_elem must be >= 1");
  if (mode == RunMode::Laser) {
    // The tracker's own validation, with the rank it will actually get.
    for (model::Site s : eligible_sites()) {
      TrackerConfig t = settings_for(s).tracker;
      t.initial_rank = settings_for(s).initial_rank(model::site_dim(model, s));
      t.max_rank = std::max(t.max_rank, t.initial_rank);
      t.validate();
    }
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::size_t seq_len_override = 0;
  std::optional<std::size_t> mlp_inner;
  std::map<std::string, Setter> keys;
  auto size_key = [&](const std::string& name, std::size_t& field) {
    keys[name] = [&field, name](const std::string& v) { field = parse_number<std::size_t>(v, name); };
  };
  auto double_key = [&](const std::string& name, double& field) {
    keys[name] = [&field, name](const std::string& v) { field = parse_number<double>(v, name); };
  };
  auto string_key = [&](const std::string& name, std::string& field) {
    keys[name] = [&field](const std::string& v) { field = unquote(trim(v)); };
  };

  size_key("model.hidden_dim", c.model.hidden_dim);
  size_key("model.num_heads", c.model.num_heads);
  size_key("model.cycles", c.model.cycles);
  size_key("model.seq_len", seq_len_override);
  keys["model.mlp_inner"] = [&](const std::string& v) { mlp_inner = parse_number<std::size_t>(v, "model.mlp_inner"); };
  double_key("model.rope_theta", c.model.rope_theta);

  tracker_keys(keys, c.tracker, "tracker.");
  size_key("tracker.min_compress_dim", c.min_compress_dim);
  keys["tracker.seed"] = [&](const std::string& v) { c.tracker.tracker.seed = parse_number<std::uint64_t>(v, "tracker.seed"); };
  keys["tracker.sites"] = [&](const std::string& v) {
    c.sites.clear();
    for (const std::string& name : split_list(v)) c.sites.push_back(model::site_from_name(name));
  };

  size_key("train.epochs", c.epochs);
  size_key("train.batch_size", c.batch_size);
  size_key("train.eval_batch_size", c.eval_batch_size);
  size_key("train.warmup_steps", c.warmup_steps);
  size_key("train.max_steps", c.max_steps);
  double_key("train.lr", c.lr);
  double_key("train.min_lr", c.min_lr);
  double_key("train.weight_decay", c.weight_decay);
  double_key("train.beta1", c.beta1);
  double_key("train.beta2", c.beta2);
  double_key("train.grad_clip", c.grad_clip);
  keys["train.loss_mask"] = [&](const std::string& v) { c.loss_mask = model::loss_mask_from_name(unquote(trim(v))); };

  string_key("data.path", c.dataset_path);
  size_key("data.maze_size", c.maze_size);
  size_key("data.train_count", c.train_count);
  size_key("data.val_count", c.val_count);

  keys["run.mode"] = [&](const std::string& v) { c.mode = run_mode_from_name(unquote(trim(v))); };
  keys["run.seeds"] = [&](const std::string& v) { c.seeds = parse_seed_list(v); };
  string_key("run.output_dir", c.output_dir);
  size_key("run.shadow_interval", c.shadow_interval);
  size_key("run.checkpoint_every", c.checkpoint_every);
  size_key("run.bytes_per_elem", c.bytes_per_elem);

  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::InvalidConfig, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      const auto dot = section.find('.');
      if (dot != std::string::npos && section.substr(0, dot) == "tracker") {
        const model::Site site = model::site_from_name(section.substr(dot + 1));
        auto& slot = c.site_overrides[static_cast<std::size_t>(site)];
        if (!slot) {
          slot = c.tracker;
          tracker_keys(keys, *slot, section + ".");
        }
      } else if (section != "model" && section != "tracker" && section != "train" && section != "data" &&
                 section != "run") {
        throw Error(ErrorKind::InvalidConfig, where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, where + "expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const auto it = keys.find(key);
    if (it == keys.end()) throw Error(ErrorKind::InvalidConfig, where + "unknown key '" + key + "'");
    try {
      it->second(trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfig, where + e.what());
    }
  }

  c.model.head_dim = c.model.num_heads ? c.model.hidden_dim / c.model.num_heads : 0;
  c.model.mlp_inner = mlp_inner.value_or(3 * c.model.hidden_dim);
  c.model.seq_len = seq_len_override ? seq_len_override : c.maze_size * c.maze_size;
  // Per-site sections inherit the global tracker seed.
  for (auto& o : c.site_overrides) {
    if (o) o->tracker.seed = c.tracker.tracker.seed;
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_tracker(std::ostream& os, const SiteTrackerSettings& t) {
  os << "initial_rank = " << t.tracker.initial_rank << "\n"
     << "rank_divisor = " << t.rank_divisor << "\n"
     << "fidelity_threshold = " << fmt(t.tracker.fidelity_threshold) << "\n"
     << "patience = " << t.tracker.patience << "\n"
     << "expansion_size = " << t.tracker.expansion_size << "\n"
     << "max_rank = " << t.tracker.max_rank << "\n"
     << "power_steps = " << t.tracker.power_steps << "\n";
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", " : "") << items[i];
  return os.str();
}

}  // namespace

std::string to_text(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\n"
     << "hidden_dim = " << c.model.hidden_dim << "\n"
     << "num_heads = " << c.model.num_heads << "\n"
     << "mlp_inner = " << c.model.mlp_inner << "\n"
     << "cycles = " << c.model.cycles << "\n"
     << "rope_theta = " << fmt(c.model.rope_theta) << "\n\n";
  os << "[tracker]\n";
  write_tracker(os, c.tracker);
  os << "seed = " << c.tracker.tracker.seed << "\n"
     << "min_compress_dim = " << c.min_compress_dim << "\n";
  std::vector<std::string> names;
  for (model::Site s : c.sites) names.push_back(model::site_name(s));
  os << "sites = [" << join(names) << "]\n\n";
  for (model::Site s : model::kAllSites) {
    const auto& o = c.site_overrides[static_cast<std::size_t>(s)];
    if (!o) continue;
    os << "[tracker." << model::site_name(s) << "]\n";
    write_tracker(os, *o);
    os << "\n";
  }
  os << "[train]\n"
     << "epochs = " << c.epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "eval_batch_size = " << c.eval_batch_size << "\n"
     << "lr = " << fmt(c.lr) << "\n"
     << "min_lr = " << fmt(c.min_lr) << "\n"
     << "warmup_steps = " << c.warmup_steps << "\n"
     << "weight_decay = " << fmt(c.weight_decay) << "\n"
     << "beta1 = " << fmt(c.beta1) << "\n"
     << "beta2 = " << fmt(c.beta2) << "\n"
     << "grad_clip = " << fmt(c.grad_clip) << "\n"
     << "loss_mask = \"" << model::to_string(c.loss_mask) << "\"\n"
     << "max_steps = " << c.max_steps << "\n\n";
  os << "[data]\n"
     << "path = \"" << c.dataset_path << "\"\n"
     << "maze_size = " << c.maze_size << "\n"
     << "train_count = " << c.train_count << "\n"
     << "val_count = " << c.val_count << "\n\n";
  os << "[run]\n"
     << "mode = \"" << to_string(c.mode) << "\"\n"
     << "seeds = [" << join(c.seeds) << "]\n"
     << "output_dir = \"" << c.output_dir << "\"\n"
     << "shadow_interval = " << c.shadow_interval << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n"
     << "bytes_per_elem = " << c.bytes_per_elem << "\n";
  return os.str();
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  auto tracker_json = [](const SiteTrackerSettings& t) {
    nlohmann::ordered_json j;
    j["initial_rank"] = t.tracker.initial_rank;
    j["rank_divisor"] = t.rank_divisor;
    j["fidelity_threshold"] = t.tracker.fidelity_threshold;
    j["patience"] = t.tracker.patience;
    j["expansion_size"] = t.tracker.expansion_size;
    j["max_rank"] = t.tracker.max_rank;
    j["power_steps"] = t.tracker.power_steps;
    return j;
  };
  nlohmann::ordered_json j;
  j["model"] = {{"hidden_dim", c.model.hidden_dim}, {"num_heads", c.model.num_heads},
                {"head_dim", c.model.head_dim},     {"mlp_inner", c.model.mlp_inner},
                {"cycles", c.model.cycles},         {"seq_len", c.model.seq_len},
                {"vocab_size", c.model.vocab_size}, {"rope_theta", c.model.rope_theta}};
  j["tracker"] = tracker_json(c.tracker);
  j["tracker"]["seed"] = c.tracker.tracker.seed;
  j["tracker"]["min_compress_dim"] = c.min_compress_dim;
  std::vector<std::string> names;
  for (model::Site s : c.sites) names.push_back(model::site_name(s));
  j["tracker"]["sites"] = names;
  for (model::Site s : model::kAllSites) {
    const auto& o = c.site_overrides[static_cast<std::size_t>(s)];
    if (o) j["tracker_overrides"][model::site_name(s)] = tracker_json(*o);
  }
  j["train"] = {{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"eval_batch_size", c.eval_batch_size},
                {"lr", c.lr},
                {"min_lr", c.min_lr},
                {"warmup_steps", c.warmup_steps},
                {"weight_decay", c.weight_decay},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"grad_clip", c.grad_clip},
                {"loss_mask", model::to_string(c.loss_mask)},
                {"max_steps", c.max_steps}};
  j["data"] = {{"path", c.dataset_path},
               {"maze_size", c.maze_size},
               {"train_count", c.train_count},
               {"val_count", c.val_count}};
  j["run"] = {{"mode", to_string(c.mode)},
              {"seeds", c.seeds},
              {"output_dir", c.output_dir},
              {"shadow_interval", c.shadow_interval},
              {"checkpoint_every", c.checkpoint_every},
              {"bytes_per_elem", c.bytes_per_elem}};
  return j;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_number<std::uint64_t>(item, "seeds"));
  if (out.empty()) throw Error(ErrorKind::InvalidConfig, "seed list is empty");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_number<std::size_t>(item, "list"));
  if (out.empty()) throw Error(ErrorKind::InvalidConfig, "list is empty");
  return out;
}

}  // namespace laser
