#pragma once

// Flat TOML-style config: [section] headers, key = value lines, # comments.
// Values: integers, floats, booleans, quoted strings, and [..] integer lists.
// CLI overrides arrive as "section.key=value" strings.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nom/metrics.hpp"
#include "nom/synth.hpp"
#include "nom/train.hpp"

namespace nom {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class KeyValues {
 public:
  static KeyValues parse_file(const std::string& path);
  static KeyValues parse_text(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct RunConfig {
  // paths
  std::string data_dir = "data";
  std::string checkpoint_dir = "checkpoints";
  std::string report_dir = "reports";
  uint64_t seed = 42;
  // grid + mesh
  int n_lat = 32;
  int n_lon = 64;
  int mesh_level = 3;
  double radius_factor = 0.6;
  // model
  int hidden = 64;
  int blocks = 4;
  // data
  int train_days = 512;
  int valid_days = 128;
  int test_days = 128;
  SynthParams synth;
  // training
  TrainConfig train;
  // ablations (one-to-one with the reported variants)
  bool prc = true;             // off: single base model, no residual stages
  bool pei = true;             // off: plain concat-MLP edge update
  GateMode mana = GateMode::Adaptive;
  bool climatology = true;     // off: train on raw periodic channels
  // evaluation
  EvalConfig eval;

  PgnConfig base_model_config() const;
  std::string train_path() const { return data_dir + "/train.nomf"; }
  std::string valid_path() const { return data_dir + "/valid.nomf"; }
  std::string test_path() const { return data_dir + "/test.nomf"; }
  std::string climatology_path() const { return data_dir + "/climatology.nomf"; }
  std::string stats_path() const { return data_dir + "/norm_stats.csv"; }
  std::string stage1_checkpoint() const { return checkpoint_dir + "/stage1.nomw"; }
  std::string stack_checkpoint() const { return checkpoint_dir + "/stack.nomw"; }
};

// config_path may be empty (defaults only); overrides and ablations apply on
// top, e.g. "train.batch=8" / "prc=off".
RunConfig make_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          const std::vector<std::string>& ablations);

std::string resolved_config_text(const RunConfig& cfg);

}  // namespace nom
