#pragma once

#include <map>
#include <string>

#include "mempo/trainer.hpp"

namespace mempo {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat "key = value" text, one pair per line, '#' comments. Unknown keys are
// rejected when applied.
std::map<std::string, std::string> parse_kv_text(const std::string& text);
std::map<std::string, std::string> parse_kv_file(const std::string& path);

// Named baselines: "desk" is the laptop-scale default; "paper" carries the
// reference hyperparameters (N=16, batch 128, lr 1e-6, 16 turns).
TrainConfig preset_config(const std::string& name);

// Applies key overrides onto a preset, fail-closed, then validates ranges.
TrainConfig apply_overrides(TrainConfig base, const std::map<std::string, std::string>& kv);

// Throws ConfigError naming the offending key and accepted range.
void validate(const TrainConfig& cfg);

// Full load path: preset, optional config file, optional seed override.
TrainConfig load_config(const std::string& preset, const std::string& config_path,
                        const std::uint64_t* seed_override);

// Key-value echo of a config, used for manifests and reproduction.
std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg);

inline constexpr const char* kCodeVersion = "mempo 0.1.0";

// FNV-1a 64 of a file's bytes, as fixed-width hex.
std::string file_hash(const std::string& path);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string dataset_path;
  std::string dataset_hash;
  std::string vocab_hash;
  std::string code_version = kCodeVersion;
  std::string started_utc;
  std::string finished_utc;
};

// Written to <dir>/manifest.json before any computation; call again with
// finished_utc set to seal the run.
void write_manifest(const RunManifest& manifest, const std::string& dir);

std::string utc_timestamp();

}  // namespace mempo
