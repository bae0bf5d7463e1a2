#include "amoe/pipeline/config.hpp"

#include <fstream>
#include <sstream>

#include "amoe/common.hpp"
#include "amoe/gating.hpp"

namespace amoe::pipeline {

const std::string& region_mode_name(RegionMode m) {
  static const std::string five = "five_lobes";
  static const std::string seven = "seven_regions";
  return m == RegionMode::five_lobes ? five : seven;
}

RegionMode region_mode_from_name(const std::string& name) {
  if (name == "five_lobes") return RegionMode::five_lobes;
  if (name == "seven_regions") return RegionMode::seven_regions;
  throw UsageError("unknown region mode: " + name);
}

std::vector<RegionId> active_regions(RegionMode mode) {
  std::vector<RegionId> out;
  const int n = mode == RegionMode::five_lobes ? kNumLobes : kNumRegions;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<RegionId>(i));
  return out;
}

std::vector<std::string> RunConfig::stage4_init_list() const {
  if (!stage4_inits.empty()) return stage4_inits;
  std::vector<std::string> inits{"uniform"};
  for (auto kind : expert_kinds) {
    inits.push_back("auc_" + experts::kind_name(kind));
    inits.push_back("gate_" + experts::kind_name(kind));
  }
  return inits;
}

std::vector<std::string> RunConfig::strategy_list() const {
  return strategies.empty() ? gating::strategy_order() : strategies;
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw UsageError("config: out dir required");
  if (folds < 2) throw UsageError("config: folds >= 2");
  if (jobs < 1) throw UsageError("config: jobs >= 1");
  if (expert_kinds.empty()) throw UsageError("config: need at least one expert kind");
  if (expert_epochs < 1 || gate_epochs < 1 || stage4_epochs < 0 || boosted_rounds < 1) {
    throw UsageError("config: bad epoch/round counts");
  }
  for (const auto& s : strategy_list()) {
    bool known = false;
    for (const auto& k : gating::strategy_order()) known = known || k == s;
    if (!known) throw UsageError("config: unknown strategy " + s);
  }
  if (manifest.empty()) synth.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config: bad integer for " + key + ": " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config: bad number for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config: bad boolean for " + key + ": " + v);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "manifest") {
    cfg.manifest = value;
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    cfg.synth.seed = cfg.seed;
  } else if (key == "jobs") {
    cfg.jobs = static_cast<int>(to_int(key, value));
  } else if (key == "folds") {
    cfg.folds = static_cast<int>(to_int(key, value));
  } else if (key == "region_mode") {
    cfg.region_mode = region_mode_from_name(value);
  } else if (key == "expert_kinds") {
    cfg.expert_kinds.clear();
    for (const auto& k : split_list(value)) cfg.expert_kinds.push_back(experts::kind_from_name(k));
  } else if (key == "strategies") {
    cfg.strategies = split_list(value);
  } else if (key == "gate_arch") {
    cfg.gate_arch = gating::arch_from_name(value);
  } else if (key == "dump_weights") {
    cfg.dump_weights = to_bool(key, value);
  } else if (key == "expert_epochs") {
    cfg.expert_epochs = static_cast<int>(to_int(key, value));
  } else if (key == "gate_epochs") {
    cfg.gate_epochs = static_cast<int>(to_int(key, value));
  } else if (key == "boosted_rounds") {
    cfg.boosted_rounds = static_cast<int>(to_int(key, value));
  } else if (key == "stage4_epochs") {
    cfg.stage4_epochs = static_cast<int>(to_int(key, value));
  } else if (key == "stage4_inits") {
    cfg.stage4_inits = split_list(value);
  } else if (key == "n_patients") {
    cfg.synth.n_patients = static_cast<int>(to_int(key, value));
  } else if (key == "scans_min") {
    cfg.synth.scans_min = static_cast<int>(to_int(key, value));
  } else if (key == "scans_max") {
    cfg.synth.scans_max = static_cast<int>(to_int(key, value));
  } else if (key == "dim_z") {
    cfg.synth.dims.depth = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "dim_y") {
    cfg.synth.dims.height = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "dim_x") {
    cfg.synth.dims.width = static_cast<std::size_t>(to_int(key, value));
  } else if (key == "prevalence") {
    cfg.synth.disease_prevalence = to_double(key, value);
  } else if (key == "basal_bias") {
    cfg.synth.basal_bias = to_double(key, value);
  } else if (key == "noise_sigma") {
    cfg.synth.noise_sigma = to_double(key, value);
  } else {
    throw UsageError("config: unknown key " + key);
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == '[') continue;  // sections are cosmetic
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config: line " + std::to_string(lineno) + " is not key = value");
    }
    apply_config_entry(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace amoe::pipeline
