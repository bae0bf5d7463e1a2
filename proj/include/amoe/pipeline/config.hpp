#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amoe/experts.hpp"
#include "amoe/gating_learned.hpp"
#include "amoe/synth.hpp"

namespace amoe::pipeline {

enum class RegionMode { five_lobes, seven_regions };

const std::string& region_mode_name(RegionMode m);
RegionMode region_mode_from_name(const std::string& name);

/// Regions participating in experts/gating/ensembles under a mode.
std::vector<RegionId> active_regions(RegionMode mode);

struct RunConfig {
  std::string out_dir = "run";
  std::string manifest;  // when set, ingest this cohort instead of synthesizing
  SynthConfig synth;

  int folds = 5;
  std::uint64_t seed = 42;
  int jobs = 1;
  RegionMode region_mode = RegionMode::seven_regions;
  std::vector<experts::ExpertKind> expert_kinds = {experts::ExpertKind::boosted_radiomics,
                                                   experts::ExpertKind::mlp_pooled};
  std::vector<std::string> strategies;  // empty = all eleven
  gating::GateArch gate_arch = gating::GateArch::mlp;
  bool dump_weights = false;

  int expert_epochs = 120;
  int gate_epochs = 60;
  int boosted_rounds = 100;
  int stage4_epochs = 40;
  std::vector<std::string> stage4_inits;  // empty = uniform + auc_/gate_ per kind

  std::vector<std::string> stage4_init_list() const;
  std::vector<std::string> strategy_list() const;

  void validate() const;
};

/// Flat "key = value" config file with cosmetic [section] headers and
/// '#' comments. Every key has a CLI flag of the same name.
RunConfig load_config_file(const std::string& path);

/// Applies one key/value pair; throws UsageError on unknown keys or bad values.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace amoe::pipeline
