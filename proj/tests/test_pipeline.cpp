#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "amoe/common.hpp"
#include "amoe/csv.hpp"
#include "amoe/pipeline/config.hpp"
#include "amoe/pipeline/ledger.hpp"
#include "amoe/pipeline/stages.hpp"
#include "doctest.h"

using namespace amoe;
using namespace amoe::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("amoe_pipe_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig cfg;
  cfg.out_dir = out.string();
  cfg.seed = 42;
  cfg.jobs = 2;
  cfg.synth.n_patients = 16;
  cfg.synth.dims = {10, 14, 14};
  cfg.expert_epochs = 12;
  cfg.gate_epochs = 8;
  cfg.stage4_epochs = 4;
  cfg.boosted_rounds = 12;
  cfg.expert_kinds = {experts::ExpertKind::boosted_radiomics};
  cfg.strategies = {"auc_softmax", "confidence", "learned_softmax"};
  cfg.stage4_inits = {"uniform", "gate_boosted"};
  return cfg;
}

}  // namespace

TEST_CASE("config: file parsing, sections, overrides, validation") {
  const auto dir = temp_dir("cfg");
  const auto path = (dir / "run.cfg").string();
  {
    std::ofstream out(path);
    out << "# experiment configuration\n";
    out << "[run]\n";
    out << "out = /tmp/somewhere\n";
    out << "seed = 7\n";
    out << "region_mode = five_lobes\n";
    out << "[synth]\n";
    out << "n_patients = 33\n";
    out << "basal_bias = 0.25\n";
    out << "expert_kinds = mlp\n";
  }
  RunConfig cfg = load_config_file(path);
  CHECK(cfg.out_dir == "/tmp/somewhere");
  CHECK(cfg.seed == 7);
  CHECK(cfg.synth.seed == 7);  // seed propagates to the generator
  CHECK(cfg.region_mode == RegionMode::five_lobes);
  CHECK(cfg.synth.n_patients == 33);
  CHECK(cfg.synth.basal_bias == doctest::Approx(0.25));
  REQUIRE(cfg.expert_kinds.size() == 1);
  CHECK(cfg.expert_kinds[0] == experts::ExpertKind::mlp_pooled);

  apply_config_entry(cfg, "jobs", "3");
  CHECK(cfg.jobs == 3);
  CHECK_THROWS_AS(apply_config_entry(cfg, "made_up_key", "1"), UsageError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "folds", "banana"), UsageError);

  cfg.validate();
  cfg.folds = 1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("config: active regions per mode") {
  CHECK(active_regions(RegionMode::five_lobes).size() == 5);
  CHECK(active_regions(RegionMode::seven_regions).size() == 7);
  CHECK(active_regions(RegionMode::seven_regions).back() == RegionId::RightLung);
}

TEST_CASE("ledger: records, freshness, and invalidation") {
  const auto dir = temp_dir("ledger");
  const auto file_a = (dir / "a.txt").string();
  const auto file_b = (dir / "b.txt").string();
  {
    std::ofstream(file_a) << "alpha";
    std::ofstream(file_b) << "beta";
  }

  RunLedger ledger((dir / "ledger.txt").string());
  ledger.load();
  CHECK(!ledger.stage_fresh("s", {file_a}));

  ledger.record("s", {file_a}, {file_b}, 5);
  CHECK(ledger.stage_fresh("s", {file_a}));

  // Output edits invalidate.
  std::ofstream(file_b) << "changed";
  CHECK(!ledger.stage_fresh("s", {file_a}));
  std::ofstream(file_b) << "beta";
  CHECK(ledger.stage_fresh("s", {file_a}));

  // Input edits invalidate.
  std::ofstream(file_a) << "different";
  CHECK(!ledger.stage_fresh("s", {file_a}));

  // Persistence across reloads.
  std::ofstream(file_a) << "alpha";
  RunLedger again((dir / "ledger.txt").string());
  again.load();
  CHECK(again.stage_fresh("s", {file_a}));

  // Missing file is stale, not an error.
  fs::remove(file_b);
  CHECK(!again.stage_fresh("s", {file_a}));
}

TEST_CASE("pipeline: tiny five-lobe run produces every artifact") {
  const auto dir = temp_dir("run5");
  RunConfig cfg = tiny_config(dir);
  cfg.region_mode = RegionMode::five_lobes;
  Pipeline p(cfg);
  p.run();

  for (const auto& path : {p.p_results(), p.p_summary(), p.p_gating_report(),
                           p.p_stage4_results(), p.p_cv_plan(), p.p_selected_gates()}) {
    CHECK(fs::exists(path));
  }

  // Five-lobe mode: only lobe experts exist and weights end at w5.
  const CsvTable results = read_csv(p.p_results());
  const int c_m = results.require_column("method");
  bool any_lung = false;
  for (const auto& row : results.rows) {
    if (row[c_m].find("LeftLung") != std::string::npos ||
        row[c_m].find("RightLung") != std::string::npos) {
      any_lung = true;
    }
  }
  CHECK(!any_lung);

  const CsvTable s4 = read_csv(p.p_stage4_results());
  const int c_w6 = s4.require_column("final_w6");
  const int c_w7 = s4.require_column("final_w7");
  for (const auto& row : s4.rows) {
    CHECK(row[c_w6] == "0");
    CHECK(row[c_w7] == "0");
  }

  // results.csv methods cover baseline, experts, ensembles, stage4 inits.
  std::set<std::string> methods;
  for (const auto& row : results.rows) methods.insert(row[c_m]);
  CHECK(methods.count("baseline_global"));
  CHECK(methods.count("expert_LLL_boosted"));
  CHECK(methods.count("uniform_boosted"));
  CHECK(methods.count("val_auc_weighted_boosted"));
  CHECK(methods.count("best_gate_boosted"));
  CHECK(methods.count("stage4_uniform"));
  CHECK(methods.count("stage4_gate_boosted"));

  // Report renders.
  std::ostringstream os;
  cmd_report(cfg.out_dir, os);
  CHECK(os.str().find("baseline_global") != std::string::npos);
  CHECK(os.str().find("Validation-Weighted") != std::string::npos);
}

TEST_CASE("pipeline: ledger skips fresh stages and reruns downstream") {
  const auto dir = temp_dir("resume");
  RunConfig cfg = tiny_config(dir);
  Pipeline p(cfg);
  p.run();

  const auto manifest_hash = hash_file(p.p_manifest());
  const auto results_before = hash_file(p.p_results());

  // Deleting a gate output forces gate + downstream only; synth output
  // hashes are untouched.
  fs::remove(p.p_gating_report());
  Pipeline p2(cfg);
  p2.run();
  CHECK(fs::exists(p.p_gating_report()));
  CHECK(hash_file(p.p_manifest()) == manifest_hash);
  CHECK(hash_file(p.p_results()) == results_before);  // deterministic rerun
}

TEST_CASE("pipeline: synth stage rejects a zero-patient config") {
  const auto dir = temp_dir("zero");
  RunConfig cfg = tiny_config(dir);
  cfg.synth.n_patients = 0;
  CHECK_THROWS_AS(Pipeline{cfg}, UsageError);
}

TEST_CASE("report: change percent formatting") {
  CHECK(format_change_percent(0.8646, 0.7685) == "+12.5%");
  CHECK(format_change_percent(0.7, 0.8) == "-12.5%");
  CHECK(format_change_percent(0.8, 0.8) == "+0.0%");
}
