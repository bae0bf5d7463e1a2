#include "amoe/pipeline/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>

#include "amoe/common.hpp"
#include "amoe/csv.hpp"
#include "amoe/descriptor.hpp"
#include "amoe/ensemble.hpp"
#include "amoe/eval.hpp"
#include "amoe/experts.hpp"
#include "amoe/gating.hpp"
#include "amoe/gating_learned.hpp"
#include "amoe/moe.hpp"
#include "amoe/radiomics/features.hpp"
#include "amoe/rng.hpp"
#include "amoe/volume_io.hpp"

namespace amoe::pipeline {

namespace fs = std::filesystem;
using experts::ExpertKind;
using experts::ExpertModel;
using experts::LabeledTable;
using experts::ScanRegionData;

namespace {

constexpr const char* kGlobalRegion = "global";

std::string fold_tag(int fold) { return "fold" + std::to_string(fold); }

/// (scan_id, region) -> values table, loaded from features/descriptors CSVs.
struct ValueTable {
  std::map<std::pair<std::string, std::string>, std::vector<double>> rows;

  const std::vector<double>& at(const std::string& scan, const std::string& region) const {
    auto it = rows.find({scan, region});
    if (it == rows.end()) throw DataError("missing table row for " + scan + "/" + region);
    return it->second;
  }
};

ValueTable load_value_table(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int c_scan = t.require_column("scan_id");
  const int c_region = t.require_column("region");
  ValueTable out;
  const std::size_t first_value = 3;  // patient_id,scan_id,region,...
  for (const auto& row : t.rows) {
    std::vector<double> values;
    values.reserve(row.size() - first_value);
    for (std::size_t c = first_value; c < row.size(); ++c) {
      values.push_back(std::strtod(row[c].c_str(), nullptr));
    }
    out.rows[{row[c_scan], row[c_region]}] = std::move(values);
  }
  return out;
}

struct FoldMembership {
  std::map<std::string, std::string> split_of_patient;  // train/validation/test
};

std::string model_file_name(RegionId region, ExpertKind kind) {
  return "expert_" + region_name(region) + "_" + experts::kind_name(kind) + ".model";
}

}  // namespace

Pipeline::Pipeline(RunConfig cfg)
    : cfg_(std::move(cfg)), out_(cfg_.out_dir), ledger_((out_ / "ledger.txt").string()) {
  cfg_.validate();
  fs::create_directories(out_);
  ledger_.load();
}

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = {"synth",    "extract", "experts", "gate",
                                                 "ensemble", "stage4",  "evaluate"};
  return names;
}

std::string Pipeline::p_manifest() const {
  return cfg_.manifest.empty() ? (out_ / "synth" / "manifest.csv").string() : cfg_.manifest;
}
std::string Pipeline::p_features() const { return (out_ / "features.csv").string(); }
std::string Pipeline::p_descriptors() const { return (out_ / "descriptors.csv").string(); }
std::string Pipeline::p_cv_plan() const { return (out_ / "cv_plan.csv").string(); }
std::string Pipeline::p_fold_dir(int fold) const { return (out_ / fold_tag(fold)).string(); }
std::string Pipeline::p_val_aucs(int fold) const {
  return (fs::path(p_fold_dir(fold)) / "val_aucs.csv").string();
}
std::string Pipeline::p_predictions(int fold) const {
  return (fs::path(p_fold_dir(fold)) / "predictions.csv").string();
}
std::string Pipeline::p_gating_report() const { return (out_ / "gating_report.csv").string(); }
std::string Pipeline::p_selected_gates() const { return (out_ / "selected_gates.csv").string(); }
std::string Pipeline::p_gate_test_preds() const {
  return (out_ / "gate_test_preds.csv").string();
}
std::string Pipeline::p_ensemble_results() const {
  return (out_ / "ensemble_results.csv").string();
}
std::string Pipeline::p_stage4_results() const { return (out_ / "stage4_results.csv").string(); }
std::string Pipeline::p_results() const { return (out_ / "results.csv").string(); }
std::string Pipeline::p_summary() const { return (out_ / "summary.csv").string(); }

std::vector<std::string> Pipeline::stage_inputs(const std::string& stage) const {
  if (stage == "synth") return {};
  if (stage == "extract") return {p_manifest()};
  if (stage == "experts") return {p_manifest(), p_features(), p_descriptors()};
  if (stage == "gate") {
    std::vector<std::string> in{p_manifest(), p_features(), p_descriptors(), p_cv_plan()};
    for (int f = 0; f < cfg_.folds; ++f) {
      in.push_back(p_val_aucs(f));
      in.push_back(p_predictions(f));
    }
    return in;
  }
  if (stage == "ensemble") {
    std::vector<std::string> in{p_manifest(), p_cv_plan(), p_gate_test_preds()};
    for (int f = 0; f < cfg_.folds; ++f) {
      in.push_back(p_val_aucs(f));
      in.push_back(p_predictions(f));
    }
    return in;
  }
  if (stage == "stage4") {
    std::vector<std::string> in{p_manifest(), p_descriptors(), p_cv_plan(), p_selected_gates()};
    for (int f = 0; f < cfg_.folds; ++f) in.push_back(p_val_aucs(f));
    return in;
  }
  if (stage == "evaluate") return {p_ensemble_results(), p_stage4_results()};
  throw UsageError("unknown stage: " + stage);
}

std::vector<std::string> Pipeline::dispatch(const std::string& stage) {
  if (stage == "synth") return stage_synth();
  if (stage == "extract") return stage_extract();
  if (stage == "experts") return stage_experts();
  if (stage == "gate") return stage_gate();
  if (stage == "ensemble") return stage_ensemble();
  if (stage == "stage4") return stage_stage4();
  if (stage == "evaluate") return stage_evaluate();
  throw UsageError("unknown stage: " + stage);
}

void Pipeline::run() {
  bool upstream_ran = false;
  for (const auto& stage : stage_names()) {
    const auto inputs = stage_inputs(stage);
    if (!upstream_ran && ledger_.stage_fresh(stage, inputs)) {
      std::printf("[pipeline] %-8s up to date, skipped\n", stage.c_str());
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;
    try {
      outputs = dispatch(stage);
    } catch (const std::exception& e) {
      throw DataError("stage " + stage + " failed: " + e.what());
    }
    const auto millis = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    ledger_.record(stage, inputs, outputs, millis);
    upstream_ran = true;
    std::printf("[pipeline] %-8s done in %lld ms\n", stage.c_str(), (long long)millis);
  }
}

void Pipeline::run_stage(const std::string& name) {
  const auto inputs = stage_inputs(name);
  const auto t0 = std::chrono::steady_clock::now();
  const auto outputs = dispatch(name);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
          .count();
  ledger_.record(name, inputs, outputs, millis);
}

// ------------------------------------------------------------------- synth

std::vector<std::string> Pipeline::stage_synth() {
  if (!cfg_.manifest.empty()) {
    load_cohort(cfg_.manifest);  // validate only; cohort is externally supplied
    return {};
  }
  const auto dir = (out_ / "synth").string();
  auto result = generate_cohort(cfg_.synth, dir);
  return {p_manifest(), (fs::path(dir) / "truth.csv").string()};
}

// ----------------------------------------------------------------- extract

std::vector<std::string> Pipeline::stage_extract() {
  const Cohort cohort = load_cohort(p_manifest());
  const auto regions = active_regions(cfg_.region_mode);
  const auto& schema = radiomics::feature_schema();

  struct ScanRows {
    std::vector<std::vector<std::string>> feature_rows;
    std::vector<std::vector<std::string>> descriptor_rows;
  };
  std::vector<ScanRows> slots(cohort.records.size());

  parallel_for(cohort.records.size(), cfg_.jobs, [&](std::size_t i) {
    const ScanRecord& rec = cohort.records[i];
    const Volume3D vol = load_volume(rec.volume_path);
    const RegionMask mask = load_mask(rec.mask_path);
    if (!(vol.dims == mask.dims)) throw DataError("dims mismatch for scan " + rec.scan_id);

    ScanRows rows;
    for (RegionId region : regions) {
      auto fv = radiomics::extract_features(vol, mask, region);
      std::vector<std::string> frow{rec.patient_id, rec.scan_id, region_name(region)};
      for (double v : fv.values) frow.push_back(fmt_double(v));
      rows.feature_rows.push_back(std::move(frow));

      auto desc = region_descriptor(vol, mask, region);
      std::vector<std::string> drow{rec.patient_id, rec.scan_id, region_name(region)};
      for (double v : desc) drow.push_back(fmt_double(v));
      rows.descriptor_rows.push_back(std::move(drow));
    }
    auto global = lung_descriptor(vol, mask);
    std::vector<std::string> grow{rec.patient_id, rec.scan_id, kGlobalRegion};
    for (double v : global) grow.push_back(fmt_double(v));
    rows.descriptor_rows.push_back(std::move(grow));
    slots[i] = std::move(rows);
  });

  CsvTable features;
  features.header = {"patient_id", "scan_id", "region"};
  for (const auto& name : schema.names) features.header.push_back(name);
  CsvTable descriptors;
  descriptors.header = {"patient_id", "scan_id", "region"};
  for (std::size_t d = 0; d < kDescriptorDim; ++d) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "d%02zu", d);
    descriptors.header.push_back(buf);
  }
  for (auto& s : slots) {
    for (auto& r : s.feature_rows) features.rows.push_back(std::move(r));
    for (auto& r : s.descriptor_rows) descriptors.rows.push_back(std::move(r));
  }
  write_csv(p_features(), features);
  write_csv(p_descriptors(), descriptors);
  return {p_features(), p_descriptors()};
}

// ----------------------------------------------------------------- experts

namespace {

FoldMembership membership_for(const CvPlan& plan, int fold) {
  FoldMembership m;
  const FoldSplit& f = plan.folds[static_cast<std::size_t>(fold)];
  for (const auto& p : f.train) m.split_of_patient[p] = "train";
  for (const auto& p : f.validation) m.split_of_patient[p] = "validation";
  for (const auto& p : f.test) m.split_of_patient[p] = "test";
  return m;
}

LabeledTable table_for(const Cohort& cohort, const ValueTable& values, const std::string& region,
                       const FoldMembership& m, const std::string& split) {
  LabeledTable t;
  for (const auto& rec : cohort.records) {
    if (m.split_of_patient.at(rec.patient_id) != split) continue;
    t.x.push_back(values.at(rec.scan_id, region));
    t.y.push_back(rec.label);
    t.patient_ids.push_back(rec.patient_id);
  }
  return t;
}

}  // namespace

std::vector<std::string> Pipeline::stage_experts() {
  const Cohort cohort = load_cohort(p_manifest());
  const CvPlan plan = make_cv_plan(cohort, cfg_.folds, cfg_.seed);
  const auto violations = leakage_audit(plan, cohort);
  if (!violations.empty()) {
    throw InvariantError("leakage audit failed: " + violations.front());
  }

  std::vector<std::string> outputs;

  // cv_plan.csv (fold, patient_id, split) in deterministic order.
  {
    CsvTable t;
    t.header = {"fold", "patient_id", "split"};
    for (const auto& f : plan.folds) {
      auto emit = [&](const std::set<std::string>& set, const char* split) {
        for (const auto& p : set) t.rows.push_back({std::to_string(f.fold), p, split});
      };
      emit(f.train, "train");
      emit(f.validation, "validation");
      emit(f.test, "test");
    }
    write_csv(p_cv_plan(), t);
    outputs.push_back(p_cv_plan());
  }

  const ValueTable features = load_value_table(p_features());
  const ValueTable descriptors = load_value_table(p_descriptors());
  const auto regions = active_regions(cfg_.region_mode);

  for (int fold = 0; fold < cfg_.folds; ++fold) {
    fs::create_directories(p_fold_dir(fold));
    const FoldMembership m = membership_for(plan, fold);

    CsvTable val_aucs;
    val_aucs.header = {"region", "kind", "val_auc"};
    CsvTable preds;
    preds.header = {"scan_id", "region", "kind", "split", "probability"};

    std::map<std::pair<std::string, ExpertKind>, ExpertModel> models;

    for (ExpertKind kind : cfg_.expert_kinds) {
      const ValueTable& source = kind == ExpertKind::boosted_radiomics ? features : descriptors;
      experts::BoostedTrainConfig bcfg;
      bcfg.rounds = cfg_.boosted_rounds;
      bcfg.seed = fnv1a("boosted/" + fold_tag(fold), cfg_.seed);
      nn::TrainConfig mcfg;
      mcfg.max_epochs = cfg_.expert_epochs;
      mcfg.label_smoothing = 0.05;
      mcfg.seed = fnv1a("mlp/" + fold_tag(fold), cfg_.seed);

      auto train_of = [&](RegionId r) {
        return table_for(cohort, source, region_name(r), m, "train");
      };
      auto val_of = [&](RegionId r) {
        return table_for(cohort, source, region_name(r), m, "validation");
      };

      // train_all_regions always trains the seven spec regions; restrict to
      // the active set by training per region here.
      for (RegionId region : regions) {
        ExpertModel model;
        if (kind == ExpertKind::boosted_radiomics) {
          auto cfg = bcfg;
          cfg.seed = fnv1a(region_name(region), bcfg.seed);
          model = experts::train_boosted_expert(train_of(region), val_of(region), region, cfg);
        } else {
          auto cfg = mcfg;
          cfg.seed = fnv1a(region_name(region), mcfg.seed);
          model = experts::train_mlp_expert(train_of(region), val_of(region), region, cfg);
        }
        const auto path = (fs::path(p_fold_dir(fold)) / model_file_name(region, kind)).string();
        experts::save_expert(model, path);
        outputs.push_back(path);
        val_aucs.rows.push_back(
            {region_name(region), experts::kind_name(kind), fmt_double(model.validation_auc)});
        models[{region_name(region), kind}] = std::move(model);
      }
    }

    // Global baseline: MLP on the whole-lung descriptor.
    {
      nn::TrainConfig gcfg;
      gcfg.max_epochs = cfg_.expert_epochs;
      gcfg.label_smoothing = 0.05;
      gcfg.seed = fnv1a("global/" + fold_tag(fold), cfg_.seed);
      LabeledTable train, val;
      train = table_for(cohort, descriptors, kGlobalRegion, m, "train");
      val = table_for(cohort, descriptors, kGlobalRegion, m, "validation");
      auto model = experts::train_mlp_expert(train, val, RegionId::LUL, gcfg);
      const auto path = (fs::path(p_fold_dir(fold)) / "expert_global_mlp.model").string();
      experts::save_expert(model, path);
      outputs.push_back(path);
      val_aucs.rows.push_back(
          {kGlobalRegion, experts::kind_name(ExpertKind::mlp_pooled),
           fmt_double(model.validation_auc)});
      models[{kGlobalRegion, ExpertKind::mlp_pooled}] = std::move(model);
    }

    // Predictions for every scan under every trained model.
    for (const auto& rec : cohort.records) {
      const std::string& split = m.split_of_patient.at(rec.patient_id);
      for (const auto& [key, model] : models) {
        const auto& [region, kind] = key;
        ScanRegionData input;
        if (kind == ExpertKind::boosted_radiomics) {
          input.radiomics = features.at(rec.scan_id, region);
        } else {
          input.descriptor = descriptors.at(rec.scan_id, region);
        }
        const auto out = experts::predict(model, input);
        preds.rows.push_back({rec.scan_id, region, experts::kind_name(kind), split,
                              fmt_double(out.probability)});
      }
    }

    write_csv(p_val_aucs(fold), val_aucs);
    write_csv(p_predictions(fold), preds);
    outputs.push_back(p_val_aucs(fold));
    outputs.push_back(p_predictions(fold));
  }
  return outputs;
}

// -------------------------------------------------------------------- gate

namespace {

struct FoldKindData {
  std::vector<gating::GateSample> train, val, test;
  std::vector<std::string> val_scan_ids, test_scan_ids;
  std::vector<double> val_aucs;  // per active region
};

std::vector<double> apply_static(const std::vector<double>& w,
                                 const std::vector<gating::GateSample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    double p = 0;
    for (std::size_t k = 0; k < w.size(); ++k) p += w[k] * s.expert_probs[k];
    out.push_back(p);
  }
  return out;
}

double auc_or_half(const std::vector<double>& scores, const std::vector<int>& labels) {
  try {
    return auc(scores, labels);
  } catch (const DataError&) {
    return 0.5;
  }
}

std::vector<int> labels_of(const std::vector<gating::GateSample>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

}  // namespace

std::vector<std::string> Pipeline::stage_gate() {
  const Cohort cohort = load_cohort(p_manifest());
  const CvPlan plan = make_cv_plan(cohort, cfg_.folds, cfg_.seed);
  const ValueTable features = load_value_table(p_features());
  const ValueTable descriptors = load_value_table(p_descriptors());
  const auto regions = active_regions(cfg_.region_mode);
  const std::size_t K = regions.size();

  CsvTable report;
  report.header = {"fold", "strategy", "val_auc", "w1", "w2", "w3", "w4", "w5", "w6", "w7"};
  CsvTable selected;
  selected.header = {"fold", "kind", "strategy", "val_auc",
                     "w1",   "w2",   "w3",       "w4",
                     "w5",   "w6",   "w7"};
  CsvTable gate_preds;
  gate_preds.header = {"fold", "kind", "scan_id", "probability"};
  std::vector<std::string> outputs;

  auto weights_row = [K](const std::vector<double>& w) {
    std::vector<std::string> cells(7, "0");
    for (std::size_t k = 0; k < K && k < 7; ++k) cells[k] = fmt_double(w[k]);
    return cells;
  };

  for (int fold = 0; fold < cfg_.folds; ++fold) {
    const FoldMembership m = membership_for(plan, fold);
    const CsvTable val_auc_csv = read_csv(p_val_aucs(fold));
    const int c_region = val_auc_csv.require_column("region");
    const int c_kind = val_auc_csv.require_column("kind");
    const int c_auc = val_auc_csv.require_column("val_auc");

    for (ExpertKind kind : cfg_.expert_kinds) {
      // Reload the fold's experts.
      std::vector<ExpertModel> models;
      FoldKindData data;
      for (RegionId region : regions) {
        const auto path = (fs::path(p_fold_dir(fold)) / model_file_name(region, kind)).string();
        auto model = experts::load_expert(path, region, kind);
        for (const auto& row : val_auc_csv.rows) {
          if (row[c_region] == region_name(region) &&
              row[c_kind] == experts::kind_name(kind)) {
            model.validation_auc = std::strtod(row[c_auc].c_str(), nullptr);
          }
        }
        data.val_aucs.push_back(model.validation_auc);
        models.push_back(std::move(model));
      }

      // Per-scan gate samples with frozen expert outputs.
      for (const auto& rec : cohort.records) {
        gating::GateSample s;
        s.label = rec.label;
        for (std::size_t k = 0; k < K; ++k) {
          ScanRegionData input;
          if (kind == ExpertKind::boosted_radiomics) {
            input.radiomics = features.at(rec.scan_id, region_name(regions[k]));
          } else {
            input.descriptor = descriptors.at(rec.scan_id, region_name(regions[k]));
          }
          auto out = experts::predict(models[k], input);
          s.expert_probs.push_back(out.probability);
          s.phis.push_back(std::move(out.phi));
        }
        const std::string& split = m.split_of_patient.at(rec.patient_id);
        if (split == "train") {
          data.train.push_back(std::move(s));
        } else if (split == "validation") {
          data.val.push_back(std::move(s));
          data.val_scan_ids.push_back(rec.scan_id);
        } else {
          data.test.push_back(std::move(s));
          data.test_scan_ids.push_back(rec.scan_id);
        }
      }

      const std::vector<int> val_labels = labels_of(data.val);
      const std::vector<int> test_labels = labels_of(data.test);
      (void)test_labels;

      struct Candidate {
        std::string id;
        double val_auc = 0.5;
        std::vector<double> static_w;                        // frozen weights when static
        std::shared_ptr<gating::LearnedGatingNet> net;       // learned strategies
        gating::GateNorm norm = gating::GateNorm::softmax;
        bool dynamic = false;
        std::vector<double> mean_val_w;                      // report column
      };
      std::vector<Candidate> candidates;

      auto add_static = [&](const std::string& id, std::vector<double> w) {
        Candidate c;
        c.id = id;
        c.static_w = std::move(w);
        c.mean_val_w = c.static_w;
        c.val_auc = auc_or_half(apply_static(c.static_w, data.val), val_labels);
        candidates.push_back(std::move(c));
      };
      auto add_dynamic = [&](const std::string& id,
                             const std::function<gating::GatingWeights(
                                 const gating::GateSample&)>& weigh) {
        Candidate c;
        c.id = id;
        c.dynamic = true;
        c.mean_val_w.assign(K, 0.0);
        std::vector<double> scores;
        for (const auto& s : data.val) {
          auto w = weigh(s);
          double p = 0;
          for (std::size_t k = 0; k < K; ++k) {
            p += w.values[k] * s.expert_probs[k];
            c.mean_val_w[k] += w.values[k] / static_cast<double>(data.val.size());
          }
          scores.push_back(p);
        }
        c.val_auc = auc_or_half(scores, val_labels);
        candidates.push_back(std::move(c));
      };

      const std::size_t phi_dim = data.val.empty() ? 0 : data.val.front().phis.front().size();

      for (const auto& id : cfg_.strategy_list()) {
        if (id == "auc_softmax") {
          add_static(id, gating::auc_softmax(data.val_aucs).values);
        } else if (id == "auc_sigmoid") {
          add_static(id, gating::auc_sigmoid(data.val_aucs).values);
        } else if (id == "auc_sparsemax") {
          add_static(id, gating::auc_sparsemax(data.val_aucs).values);
        } else if (id == "confidence") {
          add_dynamic(id, [](const gating::GateSample& s) {
            return gating::confidence_gate(s.expert_probs);
          });
        } else if (id == "error") {
          // Labels are unavailable at test time: freeze the validation mean.
          std::vector<double> w(K, 0.0);
          for (const auto& s : data.val) {
            auto g = gating::error_gate(s.expert_probs, s.label);
            for (std::size_t k = 0; k < K; ++k) {
              w[k] += g.values[k] / static_cast<double>(data.val.size());
            }
          }
          add_static(id, std::move(w));
        } else if (id == "diversity") {
          std::vector<std::vector<double>> matrix;
          for (const auto& s : data.val) matrix.push_back(s.expert_probs);
          add_static(id, gating::diversity_gate(matrix).values);
        } else if (id == "magnitude") {
          add_dynamic(id,
                      [](const gating::GateSample& s) { return gating::magnitude_gate(s.phis); });
        } else if (id == "variance") {
          add_dynamic(id,
                      [](const gating::GateSample& s) { return gating::variance_gate(s.phis); });
        } else if (id == "entropy") {
          add_dynamic(id,
                      [](const gating::GateSample& s) { return gating::entropy_gate(s.phis); });
        } else if (id == "learned_softmax" || id == "learned_sigmoid") {
          const auto norm =
              id == "learned_softmax" ? gating::GateNorm::softmax : gating::GateNorm::sigmoid;
          const std::size_t input_dim =
              cfg_.gate_arch == gating::GateArch::mlp ? K * phi_dim : phi_dim;
          auto net = std::make_shared<gating::LearnedGatingNet>(
              cfg_.gate_arch, K, input_dim,
              fnv1a(id + "/" + fold_tag(fold) + "/" + experts::kind_name(kind), cfg_.seed));
          nn::TrainConfig gcfg;
          gcfg.learning_rate = 1e-3;
          gcfg.weight_decay = 1e-4;
          gcfg.max_epochs = cfg_.gate_epochs;
          gcfg.early_stop_patience = 15;
          gcfg.grad_clip_max_norm = 1.0;
          gcfg.scheduler = nn::TrainConfig::Scheduler::none;
          gcfg.seed = fnv1a(id + "/train/" + fold_tag(fold), cfg_.seed);
          gating::train_learned_gate(*net, norm, data.train, data.val, gcfg, 0.01);

          Candidate c;
          c.id = id;
          c.dynamic = true;
          c.net = net;
          c.norm = norm;
          c.val_auc = gating::gate_ensemble_auc(*net, norm, data.val);
          c.mean_val_w.assign(K, 0.0);
          for (const auto& s : data.val) {
            auto w = net->weights(s.phis, norm);
            for (std::size_t k = 0; k < K; ++k) {
              c.mean_val_w[k] += w.values[k] / static_cast<double>(data.val.size());
            }
          }
          candidates.push_back(std::move(c));
        } else {
          throw UsageError("unknown strategy: " + id);
        }
      }

      std::vector<gating::StrategyCandidate> ranked;
      for (const auto& c : candidates) ranked.push_back({c.id, c.val_auc});
      const std::size_t best = gating::select_best_strategy(ranked);

      const std::string kind_tag = experts::kind_name(kind);
      for (const auto& c : candidates) {
        std::vector<std::string> row{std::to_string(fold), kind_tag + "/" + c.id,
                                     fmt_double(c.val_auc)};
        for (auto& cell : weights_row(c.mean_val_w)) row.push_back(std::move(cell));
        report.rows.push_back(std::move(row));

        if (cfg_.dump_weights && c.dynamic) {
          CsvTable dump;
          dump.header = {"scan_id", "w1", "w2", "w3", "w4", "w5", "w6", "w7"};
          for (std::size_t i = 0; i < data.val.size(); ++i) {
            const auto& s = data.val[i];
            gating::GatingWeights w =
                c.net ? c.net->weights(s.phis, c.norm)
                : c.id == "confidence" ? gating::confidence_gate(s.expert_probs)
                : c.id == "magnitude"  ? gating::magnitude_gate(s.phis)
                : c.id == "variance"   ? gating::variance_gate(s.phis)
                                       : gating::entropy_gate(s.phis);
            std::vector<std::string> drow{data.val_scan_ids[i]};
            for (auto& cell : weights_row(w.values)) drow.push_back(std::move(cell));
            dump.rows.push_back(std::move(drow));
          }
          const auto dump_path =
              (fs::path(p_fold_dir(fold)) / ("weights_" + kind_tag + "_" + c.id + ".csv"))
                  .string();
          write_csv(dump_path, dump);
          outputs.push_back(dump_path);
        }
      }

      const Candidate& winner = candidates[best];
      {
        std::vector<std::string> row{std::to_string(fold), kind_tag, winner.id,
                                     fmt_double(winner.val_auc)};
        for (auto& cell : weights_row(winner.mean_val_w)) row.push_back(std::move(cell));
        selected.rows.push_back(std::move(row));
      }

      // Test predictions under the winning strategy.
      for (std::size_t i = 0; i < data.test.size(); ++i) {
        const auto& s = data.test[i];
        double p = 0;
        if (winner.net) {
          auto w = winner.net->weights(s.phis, winner.norm);
          for (std::size_t k = 0; k < K; ++k) p += w.values[k] * s.expert_probs[k];
        } else if (winner.dynamic) {
          gating::GatingWeights w =
              winner.id == "confidence" ? gating::confidence_gate(s.expert_probs)
              : winner.id == "magnitude" ? gating::magnitude_gate(s.phis)
              : winner.id == "variance"  ? gating::variance_gate(s.phis)
                                         : gating::entropy_gate(s.phis);
          for (std::size_t k = 0; k < K; ++k) p += w.values[k] * s.expert_probs[k];
        } else {
          for (std::size_t k = 0; k < K; ++k) p += winner.static_w[k] * s.expert_probs[k];
        }
        gate_preds.rows.push_back(
            {std::to_string(fold), kind_tag, data.test_scan_ids[i], fmt_double(p)});
      }
    }
  }

  write_csv(p_gating_report(), report);
  write_csv(p_selected_gates(), selected);
  write_csv(p_gate_test_preds(), gate_preds);
  outputs.push_back(p_gating_report());
  outputs.push_back(p_selected_gates());
  outputs.push_back(p_gate_test_preds());
  return outputs;
}

// ---------------------------------------------------------------- ensemble

std::vector<std::string> Pipeline::stage_ensemble() {
  const Cohort cohort = load_cohort(p_manifest());
  const CvPlan plan = make_cv_plan(cohort, cfg_.folds, cfg_.seed);
  const auto regions = active_regions(cfg_.region_mode);
  const std::size_t K = regions.size();

  std::map<std::string, int> label_of;
  for (const auto& rec : cohort.records) label_of[rec.scan_id] = rec.label;

  CsvTable results;
  results.header = {"method", "fold", "test_auc"};
  auto add_row = [&results](const std::string& method, int fold, double auc_value) {
    results.rows.push_back({method, std::to_string(fold), fmt_double(auc_value)});
  };

  const CsvTable gate_preds = read_csv(p_gate_test_preds());
  const int gp_fold = gate_preds.require_column("fold");
  const int gp_kind = gate_preds.require_column("kind");
  const int gp_scan = gate_preds.require_column("scan_id");
  const int gp_prob = gate_preds.require_column("probability");

  for (int fold = 0; fold < cfg_.folds; ++fold) {
    const CsvTable preds = read_csv(p_predictions(fold));
    const int c_scan = preds.require_column("scan_id");
    const int c_region = preds.require_column("region");
    const int c_kind = preds.require_column("kind");
    const int c_split = preds.require_column("split");
    const int c_prob = preds.require_column("probability");

    // (region, kind) -> test scan probabilities in file order.
    std::map<std::pair<std::string, std::string>, std::vector<double>> test_probs;
    std::map<std::pair<std::string, std::string>, std::vector<int>> test_labels;
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> test_scans;
    for (const auto& row : preds.rows) {
      if (row[c_split] != "test") continue;
      const auto key = std::make_pair(row[c_region], row[c_kind]);
      test_probs[key].push_back(std::strtod(row[c_prob].c_str(), nullptr));
      test_labels[key].push_back(label_of.at(row[c_scan]));
      test_scans[key].push_back(row[c_scan]);
    }

    auto auc_of = [&](const std::string& region, const std::string& kind) {
      const auto key = std::make_pair(region, kind);
      return auc_or_half(test_probs.at(key), test_labels.at(key));
    };

    add_row("baseline_global", fold, auc_of(kGlobalRegion, "mlp"));

    const CsvTable val_auc_csv = read_csv(p_val_aucs(fold));
    const int c_vregion = val_auc_csv.require_column("region");
    const int c_vkind = val_auc_csv.require_column("kind");
    const int c_vauc = val_auc_csv.require_column("val_auc");

    for (ExpertKind kind : cfg_.expert_kinds) {
      const std::string kind_tag = experts::kind_name(kind);
      std::vector<double> val_aucs;
      for (RegionId region : regions) {
        add_row("expert_" + region_name(region) + "_" + kind_tag, fold,
                auc_of(region_name(region), kind_tag));
        for (const auto& row : val_auc_csv.rows) {
          if (row[c_vregion] == region_name(region) && row[c_vkind] == kind_tag) {
            val_aucs.push_back(std::strtod(row[c_vauc].c_str(), nullptr));
          }
        }
      }
      if (val_aucs.size() != K) throw DataError("val_aucs.csv incomplete");

      // Uniform and Eq-(2) weighted ensembles over the per-expert test probs.
      const auto ref_key = std::make_pair(region_name(regions[0]), kind_tag);
      const std::size_t n_test = test_probs.at(ref_key).size();
      const auto eq2 = moe::val_auc_weights(val_aucs);
      std::vector<double> uniform_scores(n_test, 0.0), weighted_scores(n_test, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const auto key = std::make_pair(region_name(regions[k]), kind_tag);
        const auto& probs = test_probs.at(key);
        if (probs.size() != n_test) throw DataError("ragged test predictions");
        for (std::size_t i = 0; i < n_test; ++i) {
          uniform_scores[i] += probs[i] / static_cast<double>(K);
          weighted_scores[i] += eq2[k] * probs[i];
        }
      }
      const auto& labels = test_labels.at(ref_key);
      add_row("uniform_" + kind_tag, fold, auc_or_half(uniform_scores, labels));
      add_row("val_auc_weighted_" + kind_tag, fold, auc_or_half(weighted_scores, labels));

      // Best-gate ensemble from the gate stage's test predictions.
      std::vector<double> gate_scores;
      std::vector<int> gate_labels;
      for (const auto& row : gate_preds.rows) {
        if (row[gp_fold] == std::to_string(fold) && row[gp_kind] == kind_tag) {
          gate_scores.push_back(std::strtod(row[gp_prob].c_str(), nullptr));
          gate_labels.push_back(label_of.at(row[gp_scan]));
        }
      }
      add_row("best_gate_" + kind_tag, fold, auc_or_half(gate_scores, gate_labels));
    }
  }

  write_csv(p_ensemble_results(), results);
  return {p_ensemble_results()};
}

// ------------------------------------------------------------------ stage4

std::vector<std::string> Pipeline::stage_stage4() {
  const Cohort cohort = load_cohort(p_manifest());
  const CvPlan plan = make_cv_plan(cohort, cfg_.folds, cfg_.seed);
  const ValueTable descriptors = load_value_table(p_descriptors());
  const auto regions = active_regions(cfg_.region_mode);
  const std::size_t K = regions.size();

  const CsvTable selected = read_csv(p_selected_gates());
  const int s_fold = selected.require_column("fold");
  const int s_kind = selected.require_column("kind");

  CsvTable results;
  results.header = {"fold", "init_strategy", "test_auc",
                    "final_w1", "final_w2", "final_w3", "final_w4",
                    "final_w5", "final_w6", "final_w7"};

  for (int fold = 0; fold < cfg_.folds; ++fold) {
    const FoldMembership m = membership_for(plan, fold);

    std::vector<moe::MoEHead::Sample> train, val, test;
    for (const auto& rec : cohort.records) {
      moe::MoEHead::Sample s;
      s.global_desc = descriptors.at(rec.scan_id, kGlobalRegion);
      for (RegionId region : regions) {
        s.region_descs.push_back(descriptors.at(rec.scan_id, region_name(region)));
      }
      s.label = rec.label;
      const std::string& split = m.split_of_patient.at(rec.patient_id);
      (split == "train" ? train : split == "validation" ? val : test).push_back(std::move(s));
    }

    const CsvTable val_auc_csv = read_csv(p_val_aucs(fold));
    const int c_region = val_auc_csv.require_column("region");
    const int c_kind = val_auc_csv.require_column("kind");
    const int c_auc = val_auc_csv.require_column("val_auc");
    auto region_val_aucs = [&](const std::string& kind_tag) {
      std::vector<double> out;
      for (RegionId region : regions) {
        for (const auto& row : val_auc_csv.rows) {
          if (row[c_region] == region_name(region) && row[c_kind] == kind_tag) {
            out.push_back(std::strtod(row[c_auc].c_str(), nullptr));
          }
        }
      }
      if (out.size() != K) throw DataError("val_aucs.csv incomplete for " + kind_tag);
      return out;
    };

    for (const auto& init_name : cfg_.stage4_init_list()) {
      std::vector<double> w;
      if (init_name == "uniform") {
        w.assign(K, 1.0 / static_cast<double>(K));
      } else if (init_name.rfind("auc_", 0) == 0) {
        w = moe::val_auc_weights(region_val_aucs(init_name.substr(4)));
      } else if (init_name.rfind("gate_", 0) == 0) {
        const std::string kind_tag = init_name.substr(5);
        bool found = false;
        for (const auto& row : selected.rows) {
          if (row[s_fold] == std::to_string(fold) && row[s_kind] == kind_tag) {
            for (std::size_t k = 0; k < K; ++k) {
              w.push_back(std::strtod(row[4 + k].c_str(), nullptr));
            }
            found = true;
          }
        }
        if (!found) throw DataError("selected gate missing for " + kind_tag);
        double sum = 0;
        for (double x : w) sum += x;
        for (double& x : w) x = sum > 0 ? x / sum : 1.0 / static_cast<double>(K);
      } else {
        throw UsageError("unknown stage4 init: " + init_name);
      }

      // Hierarchical normalization applies in seven-region mode only.
      if (cfg_.region_mode == RegionMode::seven_regions) {
        auto [lobes, lungs] = moe::hierarchical_normalize(w);
        w.assign(lobes.begin(), lobes.end());
        w.insert(w.end(), lungs.begin(), lungs.end());
      }

      moe::MoEConfig head_cfg;
      head_cfg.n_regions = K;
      head_cfg.seed = fnv1a("stage4/" + init_name + "/" + fold_tag(fold), cfg_.seed);
      moe::MoEHead head(head_cfg, w);

      moe::MoETrainConfig tcfg;
      tcfg.max_epochs = cfg_.stage4_epochs;
      tcfg.seed = head_cfg.seed;
      moe::train_moe(head, train, val, tcfg);

      const double test_auc = moe::moe_auc(head, test);
      const auto final_w = head.expert_weights();
      std::vector<std::string> row{std::to_string(fold), init_name, fmt_double(test_auc)};
      for (std::size_t k = 0; k < 7; ++k) {
        row.push_back(k < K ? fmt_double(final_w[k]) : "0");
      }
      results.rows.push_back(std::move(row));
    }
  }

  write_csv(p_stage4_results(), results);
  return {p_stage4_results()};
}

// ---------------------------------------------------------------- evaluate

std::vector<std::string> Pipeline::stage_evaluate() {
  const CsvTable ensemble = read_csv(p_ensemble_results());
  const CsvTable stage4 = read_csv(p_stage4_results());

  struct Row {
    std::string method;
    int fold;
    double auc;
  };
  std::vector<Row> rows;
  {
    const int c_m = ensemble.require_column("method");
    const int c_f = ensemble.require_column("fold");
    const int c_a = ensemble.require_column("test_auc");
    for (const auto& r : ensemble.rows) {
      rows.push_back({r[c_m], static_cast<int>(std::strtol(r[c_f].c_str(), nullptr, 10)),
                      std::strtod(r[c_a].c_str(), nullptr)});
    }
  }
  {
    const int c_f = stage4.require_column("fold");
    const int c_i = stage4.require_column("init_strategy");
    const int c_a = stage4.require_column("test_auc");
    for (const auto& r : stage4.rows) {
      rows.push_back({"stage4_" + r[c_i], static_cast<int>(std::strtol(r[c_f].c_str(), nullptr, 10)),
                      std::strtod(r[c_a].c_str(), nullptr)});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.fold < b.fold;
  });

  CsvTable results;
  results.header = {"method", "fold", "test_auc"};
  std::map<std::string, std::vector<double>> by_method;
  for (const auto& r : rows) {
    results.rows.push_back({r.method, std::to_string(r.fold), fmt_double(r.auc)});
    by_method[r.method].push_back(r.auc);
  }
  write_csv(p_results(), results);

  const auto baseline_it = by_method.find("baseline_global");
  if (baseline_it == by_method.end()) throw DataError("results missing baseline_global");
  const auto& baseline = baseline_it->second;

  CsvTable summary;
  summary.header = {"method", "mean", "sd", "ci_lo", "ci_hi", "p_vs_baseline"};
  for (const auto& [method, aucs] : by_method) {
    const MethodResult r = summarize(method, aucs);
    std::string p_cell;
    if (method != "baseline_global" && aucs.size() == baseline.size()) {
      std::vector<double> deltas;
      for (std::size_t i = 0; i < aucs.size(); ++i) deltas.push_back(aucs[i] - baseline[i]);
      const auto tt = paired_t_test(deltas);
      p_cell = fmt_double(tt.p);
    }
    summary.rows.push_back({method, fmt_double(r.mean), fmt_double(r.sd), fmt_double(r.ci_lo),
                            fmt_double(r.ci_hi), p_cell});
  }
  write_csv(p_summary(), summary);
  return {p_results(), p_summary()};
}

}  // namespace amoe::pipeline
