#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "amoe/pipeline/config.hpp"
#include "amoe/pipeline/ledger.hpp"

namespace amoe::pipeline {

/// Four-stage pipeline driver (synthesize/ingest -> extract -> experts ->
/// gate -> ensemble -> stage4 -> evaluate) with ledger-based resume: a stage
/// re-runs when its record is missing, its input or output hashes changed,
/// or anything upstream re-ran this invocation.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  static const std::vector<std::string>& stage_names();

  /// Full run honoring the ledger.
  void run();

  /// Runs one stage unconditionally (CLI subcommands).
  void run_stage(const std::string& name);

  // Result file locations (web of stages; also used by tests).
  std::string p_manifest() const;
  std::string p_features() const;
  std::string p_descriptors() const;
  std::string p_cv_plan() const;
  std::string p_fold_dir(int fold) const;
  std::string p_val_aucs(int fold) const;
  std::string p_predictions(int fold) const;
  std::string p_gating_report() const;
  std::string p_selected_gates() const;
  std::string p_gate_test_preds() const;
  std::string p_ensemble_results() const;
  std::string p_stage4_results() const;
  std::string p_results() const;
  std::string p_summary() const;

 private:
  RunConfig cfg_;
  std::filesystem::path out_;
  RunLedger ledger_;

  std::vector<std::string> stage_inputs(const std::string& stage) const;
  std::vector<std::string> dispatch(const std::string& stage);  // returns outputs written

  std::vector<std::string> stage_synth();
  std::vector<std::string> stage_extract();
  std::vector<std::string> stage_experts();
  std::vector<std::string> stage_gate();
  std::vector<std::string> stage_ensemble();
  std::vector<std::string> stage_stage4();
  std::vector<std::string> stage_evaluate();
};

/// Renders the grouped results table from summary.csv.
void cmd_report(const std::string& out_dir, std::ostream& os);

/// "+12.5%" style change formatting against the baseline mean.
std::string format_change_percent(double method_mean, double baseline_mean);

}  // namespace amoe::pipeline
