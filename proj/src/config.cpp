#include "mempo/config.hpp"

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mempo {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
  }
}

OptimizerKind parse_optimizer(const std::string& key, const std::string& value) {
  if (value == "sgd") return OptimizerKind::Sgd;
  if (value == "adam") return OptimizerKind::Adam;
  throw ConfigError("key '" + key + "': expected sgd|adam, got '" + value + "'");
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    if (kv.count(key))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

TrainConfig preset_config(const std::string& name) {
  TrainConfig cfg;  // defaults are the desk preset
  if (name == "desk") return cfg;
  if (name == "paper") {
    cfg.group_size = 16;
    cfg.batch_size = 128;
    cfg.learning_rate = 1e-6;
    cfg.max_turns = 16;
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk|paper)");
}

TrainConfig apply_overrides(TrainConfig base, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "group_size") base.group_size = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") base.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "learning_rate") base.learning_rate = parse_double(key, value);
    else if (key == "clip_epsilon") base.clip_epsilon = parse_double(key, value);
    else if (key == "kl_beta") base.kl_beta = parse_double(key, value);
    else if (key == "max_turns") base.max_turns = static_cast<int>(parse_int(key, value));
    else if (key == "epochs_per_batch") base.epochs_per_batch = static_cast<int>(parse_int(key, value));
    else if (key == "seed") base.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "group_mode") {
      if (value == "pooled") base.group_mode = GroupMode::Pooled;
      else if (value == "per_step") base.group_mode = GroupMode::PerStep;
      else throw ConfigError("key 'group_mode': expected pooled|per_step, got '" + value + "'");
    }
    else if (key == "num_updates") base.num_updates = static_cast<int>(parse_int(key, value));
    else if (key == "optimizer") base.optimizer = parse_optimizer(key, value);
    else if (key == "memory_credit") {
      if (value == "on") base.memory_credit = true;
      else if (value == "off") base.memory_credit = false;
      else throw ConfigError("key 'memory_credit': expected on|off, got '" + value + "'");
    }
    else if (key == "temperature") base.temperature = parse_double(key, value);
    else if (key == "max_new_tokens") base.max_new_tokens = static_cast<int>(parse_int(key, value));
    else if (key == "top_k") base.top_k = static_cast<int>(parse_int(key, value));
    else if (key == "model_dim") base.model_dim = static_cast<int>(parse_int(key, value));
    else if (key == "model_window") base.model_window = static_cast<int>(parse_int(key, value));
    else if (key == "bc_epochs") base.bc_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "bc_learning_rate") base.bc_learning_rate = parse_double(key, value);
    else if (key == "bc_optimizer") base.bc_optimizer = parse_optimizer(key, value);
    else if (key == "bc_max_demos") base.bc_max_demos = static_cast<int>(parse_int(key, value));
    else if (key == "train_fraction") base.train_fraction = parse_double(key, value);
    else if (key == "checkpoint_every") base.checkpoint_every = static_cast<int>(parse_int(key, value));
    else if (key == "workers") base.workers = static_cast<int>(parse_int(key, value));
    else throw ConfigError("unknown key '" + key + "'");
  }
  validate(base);
  return base;
}

void validate(const TrainConfig& cfg) {
  check(cfg.group_size >= 2, "key 'group_size': must be >= 2");
  check(cfg.batch_size >= 1, "key 'batch_size': must be >= 1");
  check(cfg.learning_rate > 0.0, "key 'learning_rate': must be > 0");
  check(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0,
        "key 'clip_epsilon': must lie in (0, 1)");
  check(cfg.kl_beta >= 0.0, "key 'kl_beta': must be >= 0");
  check(cfg.max_turns >= 1, "key 'max_turns': must be >= 1");
  check(cfg.epochs_per_batch >= 1, "key 'epochs_per_batch': must be >= 1");
  check(cfg.num_updates >= 0, "key 'num_updates': must be >= 0");
  check(cfg.temperature > 0.0, "key 'temperature': must be > 0");
  check(cfg.max_new_tokens >= 1, "key 'max_new_tokens': must be >= 1");
  check(cfg.top_k >= 1, "key 'top_k': must be >= 1");
  check(cfg.model_dim >= 1, "key 'model_dim': must be >= 1");
  check(cfg.model_window >= 1, "key 'model_window': must be >= 1");
  check(cfg.bc_epochs >= 0, "key 'bc_epochs': must be >= 0");
  check(cfg.bc_learning_rate > 0.0, "key 'bc_learning_rate': must be > 0");
  check(cfg.bc_max_demos >= 1, "key 'bc_max_demos': must be >= 1");
  check(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0,
        "key 'train_fraction': must lie in (0, 1]");
  check(cfg.checkpoint_every >= 0, "key 'checkpoint_every': must be >= 0");
  check(cfg.workers >= 1, "key 'workers': must be >= 1");
}

TrainConfig load_config(const std::string& preset, const std::string& config_path,
                        const std::uint64_t* seed_override) {
  TrainConfig cfg = preset_config(preset);
  if (!config_path.empty()) cfg = apply_overrides(cfg, parse_kv_file(config_path));
  if (seed_override != nullptr) cfg.seed = *seed_override;
  validate(cfg);
  return cfg;
}

std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg) {
  std::map<std::string, std::string> kv;
  auto put_int = [&kv](const char* key, long long v) { kv[key] = std::to_string(v); };
  auto put_double = [&kv](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    kv[key] = buf;
  };
  put_int("group_size", cfg.group_size);
  put_int("batch_size", cfg.batch_size);
  put_double("learning_rate", cfg.learning_rate);
  put_double("clip_epsilon", cfg.clip_epsilon);
  put_double("kl_beta", cfg.kl_beta);
  put_int("max_turns", cfg.max_turns);
  put_int("epochs_per_batch", cfg.epochs_per_batch);
  put_int("seed", static_cast<long long>(cfg.seed));
  kv["group_mode"] = cfg.group_mode == GroupMode::Pooled ? "pooled" : "per_step";
  put_int("num_updates", cfg.num_updates);
  kv["optimizer"] = cfg.optimizer == OptimizerKind::Sgd ? "sgd" : "adam";
  kv["memory_credit"] = cfg.memory_credit ? "on" : "off";
  put_double("temperature", cfg.temperature);
  put_int("max_new_tokens", cfg.max_new_tokens);
  put_int("top_k", cfg.top_k);
  put_int("model_dim", cfg.model_dim);
  put_int("model_window", cfg.model_window);
  put_int("bc_epochs", cfg.bc_epochs);
  put_double("bc_learning_rate", cfg.bc_learning_rate);
  kv["bc_optimizer"] = cfg.bc_optimizer == OptimizerKind::Sgd ? "sgd" : "adam";
  put_int("bc_max_demos", cfg.bc_max_demos);
  put_double("train_fraction", cfg.train_fraction);
  put_int("checkpoint_every", cfg.checkpoint_every);
  put_int("workers", cfg.workers);
  return kv;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  static const char* digits = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return hex;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seed"] = manifest.seed;
  j["dataset_path"] = manifest.dataset_path;
  j["dataset_hash"] = manifest.dataset_hash;
  j["vocab_hash"] = manifest.vocab_hash;
  j["code_version"] = manifest.code_version;
  j["started_utc"] = manifest.started_utc;
  j["finished_utc"] = manifest.finished_utc;
  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
}

}  // namespace mempo
