#include "nom/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace nom {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) b++;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) e--;
  return s.substr(b, e - b);
}

}  // namespace

KeyValues KeyValues::parse_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    kv.values_[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int64_t KeyValues::get_int(const std::string& key, int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(key + ": expected integer, got '" + it->second + "'");
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(key + ": expected number, got '" + it->second + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected boolean, got '" + it->second + "'");
}

std::vector<int> KeyValues::get_int_list(const std::string& key,
                                         const std::vector<int>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  if (!v.empty() && v.front() == '[') v = v.substr(1);
  if (!v.empty() && v.back() == ']') v.pop_back();
  std::vector<int> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (...) {
      throw ConfigError(key + ": expected integer list, got '" + it->second + "'");
    }
  }
  return out;
}

PgnConfig RunConfig::base_model_config() const {
  PgnConfig c;
  c.out_channels = static_cast<int64_t>(prognostic_channels().size());
  c.in_channels = c.out_channels + 2 * static_cast<int64_t>(forcing_channels().size());
  c.hidden = hidden;
  c.blocks = blocks;
  c.physics_edges = pei;
  c.gate = mana;
  return c;
}

RunConfig make_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          const std::vector<std::string>& ablations) {
  KeyValues kv;
  if (!config_path.empty()) kv = KeyValues::parse_file(config_path);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + ov + "' is not key=value");
    kv.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  for (const auto& ab : ablations) {
    const auto eq = ab.find('=');
    if (eq == std::string::npos) throw ConfigError("ablation '" + ab + "' is not name=value");
    kv.set("ablate." + trim(ab.substr(0, eq)), trim(ab.substr(eq + 1)));
  }

  RunConfig cfg;
  cfg.data_dir = kv.get_string("paths.data_dir", cfg.data_dir);
  cfg.checkpoint_dir = kv.get_string("paths.checkpoint_dir", cfg.checkpoint_dir);
  cfg.report_dir = kv.get_string("paths.report_dir", cfg.report_dir);
  cfg.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(cfg.seed)));

  cfg.n_lat = static_cast<int>(kv.get_int("grid.n_lat", cfg.n_lat));
  cfg.n_lon = static_cast<int>(kv.get_int("grid.n_lon", cfg.n_lon));
  cfg.mesh_level = static_cast<int>(kv.get_int("mesh.level", cfg.mesh_level));
  cfg.radius_factor = kv.get_double("mesh.radius_factor", cfg.radius_factor);

  cfg.hidden = static_cast<int>(kv.get_int("model.hidden", cfg.hidden));
  cfg.blocks = static_cast<int>(kv.get_int("model.blocks", cfg.blocks));

  cfg.train_days = static_cast<int>(kv.get_int("data.train_days", cfg.train_days));
  cfg.valid_days = static_cast<int>(kv.get_int("data.valid_days", cfg.valid_days));
  cfg.test_days = static_cast<int>(kv.get_int("data.test_days", cfg.test_days));
  cfg.synth.n_lat = cfg.n_lat;
  cfg.synth.n_lon = cfg.n_lon;
  cfg.synth.cycle = static_cast<int>(kv.get_int("data.cycle", cfg.synth.cycle));
  cfg.synth.substeps = static_cast<int>(kv.get_int("data.substeps", cfg.synth.substeps));
  cfg.synth.gyre_strength = kv.get_double("data.gyre_strength", cfg.synth.gyre_strength);
  cfg.synth.diffusivity = kv.get_double("data.diffusivity", cfg.synth.diffusivity);
  cfg.synth.relax_rate = kv.get_double("data.relax_rate", cfg.synth.relax_rate);
  cfg.synth.noise_amp = kv.get_double("data.noise_amp", cfg.synth.noise_amp);
  cfg.synth.land_fraction = kv.get_double("data.land_fraction", cfg.synth.land_fraction);

  cfg.train.q = kv.get_int("train.q", cfg.train.q);
  cfg.train.m_horizon = static_cast<int>(kv.get_int("train.m", cfg.train.m_horizon));
  cfg.train.n_horizon = static_cast<int>(kv.get_int("train.n", cfg.train.n_horizon));
  cfg.train.pretrain_epochs = static_cast<int>(kv.get_int("train.pretrain_epochs", cfg.train.pretrain_epochs));
  cfg.train.finetune_epochs = static_cast<int>(kv.get_int("train.finetune_epochs", cfg.train.finetune_epochs));
  cfg.train.residual_epochs = static_cast<int>(kv.get_int("train.residual_epochs", cfg.train.residual_epochs));
  cfg.train.base_lr = kv.get_double("train.base_lr", cfg.train.base_lr);
  cfg.train.finetune_lr = kv.get_double("train.finetune_lr", cfg.train.finetune_lr);
  cfg.train.lr_min = kv.get_double("train.lr_min", cfg.train.lr_min);
  cfg.train.batch = static_cast<int>(kv.get_int("train.batch", cfg.train.batch));
  cfg.train.steps_per_epoch = static_cast<int>(kv.get_int("train.steps_per_epoch", cfg.train.steps_per_epoch));
  cfg.train.valid_windows = static_cast<int>(kv.get_int("train.valid_windows", cfg.train.valid_windows));
  cfg.train.seed = cfg.seed;

  cfg.prc = kv.get_bool("ablate.prc", cfg.prc);
  cfg.pei = kv.get_bool("ablate.pei", cfg.pei);
  cfg.climatology = kv.get_bool("ablate.climatology", cfg.climatology);
  const std::string mana = kv.get_string("ablate.mana", "adaptive");
  if (mana == "adaptive") cfg.mana = GateMode::Adaptive;
  else if (mana == "sum_only") cfg.mana = GateMode::SumOnly;
  else if (mana == "mean_only") cfg.mana = GateMode::MeanOnly;
  else throw ConfigError("ablate.mana: expected adaptive|sum_only|mean_only, got '" + mana + "'");
  if (!cfg.prc) cfg.train.q = 1;

  cfg.eval.leads = kv.get_int_list("eval.leads", cfg.eval.leads);
  cfg.eval.n_ics = static_cast<int>(kv.get_int("eval.n_ics", cfg.eval.n_ics));
  cfg.eval.quantile = kv.get_double("eval.quantile", cfg.eval.quantile);
  cfg.eval.conventional_far = kv.get_bool("eval.conventional_far", cfg.eval.conventional_far);
  cfg.eval.subtract_climatology = cfg.climatology;
  return cfg;
}

std::string resolved_config_text(const RunConfig& c) {
  std::ostringstream os;
  os << "seed = " << c.seed << "\n";
  os << "[paths]\n";
  os << "data_dir = \"" << c.data_dir << "\"\n";
  os << "checkpoint_dir = \"" << c.checkpoint_dir << "\"\n";
  os << "report_dir = \"" << c.report_dir << "\"\n";
  os << "[grid]\nn_lat = " << c.n_lat << "\nn_lon = " << c.n_lon << "\n";
  os << "[mesh]\nlevel = " << c.mesh_level << "\nradius_factor = " << c.radius_factor << "\n";
  os << "[model]\nhidden = " << c.hidden << "\nblocks = " << c.blocks << "\n";
  os << "[data]\ntrain_days = " << c.train_days << "\nvalid_days = " << c.valid_days
     << "\ntest_days = " << c.test_days << "\ncycle = " << c.synth.cycle
     << "\nsubsteps = " << c.synth.substeps << "\ngyre_strength = " << c.synth.gyre_strength
     << "\ndiffusivity = " << c.synth.diffusivity << "\nrelax_rate = " << c.synth.relax_rate
     << "\nnoise_amp = " << c.synth.noise_amp << "\nland_fraction = " << c.synth.land_fraction
     << "\n";
  os << "[train]\nq = " << c.train.q << "\nm = " << c.train.m_horizon << "\nn = " << c.train.n_horizon
     << "\npretrain_epochs = " << c.train.pretrain_epochs
     << "\nfinetune_epochs = " << c.train.finetune_epochs
     << "\nresidual_epochs = " << c.train.residual_epochs << "\nbase_lr = " << c.train.base_lr
     << "\nfinetune_lr = " << c.train.finetune_lr << "\nlr_min = " << c.train.lr_min
     << "\nbatch = " << c.train.batch << "\nsteps_per_epoch = " << c.train.steps_per_epoch
     << "\nvalid_windows = " << c.train.valid_windows << "\n";
  os << "[ablate]\nprc = " << (c.prc ? "on" : "off") << "\npei = " << (c.pei ? "on" : "off")
     << "\nmana = "
     << (c.mana == GateMode::Adaptive ? "adaptive"
                                      : c.mana == GateMode::SumOnly ? "sum_only" : "mean_only")
     << "\nclimatology = " << (c.climatology ? "on" : "off") << "\n";
  os << "[eval]\nleads = [";
  for (size_t i = 0; i < c.eval.leads.size(); ++i) os << (i ? ", " : "") << c.eval.leads[i];
  os << "]\nn_ics = " << c.eval.n_ics << "\nquantile = " << c.eval.quantile
     << "\nconventional_far = " << (c.eval.conventional_far ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace nom
