#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "amoe/descriptor.hpp"
#include "amoe/nn/layers.hpp"
#include "amoe/nn/train.hpp"
#include "amoe/volume.hpp"

namespace amoe::experts {

enum class ExpertKind { boosted_radiomics, mlp_pooled };

const std::string& kind_name(ExpertKind k);
ExpertKind kind_from_name(const std::string& name);

/// Depth-1 regression tree: x[feature] <= threshold ? left : right.
/// Leaf values are stored post-shrinkage, so removing one stump changes the
/// model logit by exactly that stump's output.
struct Stump {
  int feature = 0;
  double threshold = 0;
  double left = 0;
  double right = 0;

  double eval(const std::vector<double>& x) const {
    return x[static_cast<std::size_t>(feature)] <= threshold ? left : right;
  }
};

struct BoostedModel {
  double base_logit = 0;
  std::vector<Stump> stumps;
  std::string schema_id;

  double logit(const std::vector<double>& features) const;
};

/// Compact pooled-descriptor network 19 -> 32 -> 16 -> 1. The penultimate
/// 16-vector (post-ReLU) is the expert's feature hook. Inputs pass through a
/// fixed diagonal scaling so HU-scale values are O(1).
class MlpNet {
 public:
  explicit MlpNet(std::uint64_t init_seed);

  struct Output {
    double probability = 0.5;
    std::vector<double> phi;  // 16
  };
  Output forward(const std::vector<double>& descriptor) const;

  /// Batch forward on the tape; returns probabilities [n, 1].
  nn::Tape::Var forward_batch(nn::Tape& t, const std::vector<std::vector<double>>& descriptors,
                              nn::Tape::Var* phi_out = nullptr) const;

  std::vector<nn::Parameter*> params();
  std::vector<const nn::Parameter*> params() const;

  static constexpr std::size_t kPhiDim = 16;

 private:
  nn::DenseLayer l1_, l2_, l3_;
};

struct ExpertModel {
  RegionId region = RegionId::LUL;
  ExpertKind kind = ExpertKind::boosted_radiomics;
  double validation_auc = -1;  // must be set before the expert enters an ensemble
  BoostedModel boosted;
  std::shared_ptr<MlpNet> mlp;

  std::size_t phi_dim() const;
};

/// Per-(scan, region) inputs: the radiomics vector feeds boosted experts,
/// the pooled descriptor feeds MLP experts.
struct ScanRegionData {
  std::vector<double> radiomics;
  std::vector<double> descriptor;
};

struct ExpertOutput {
  double probability = 0.5;     // strictly inside (0,1)
  std::vector<double> phi;      // radiomics vector or penultimate activations
};

ExpertOutput predict(const ExpertModel& expert, const ScanRegionData& input);

struct LabeledTable {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<std::string> patient_ids;

  std::size_t size() const { return x.size(); }
};

struct BoostedTrainConfig {
  int rounds = 100;
  double shrinkage = 0.1;
  std::uint64_t seed = 42;
};

/// Gradient boosting on logistic loss: each round fits the stump minimizing
/// squared error to the residuals y - sigmoid(F), scanning all unique
/// midpoints of every feature. Validation AUC is recorded on the held-out
/// table (0.5 when the validation labels are single-class).
ExpertModel train_boosted_expert(const LabeledTable& train, const LabeledTable& val,
                                 RegionId region, const BoostedTrainConfig& cfg);

ExpertModel train_mlp_expert(const LabeledTable& train, const LabeledTable& val, RegionId region,
                             const nn::TrainConfig& cfg);

/// One expert per region. `train_of` / `val_of` supply per-region tables;
/// patient purity between them is audited and fatal on violation.
std::vector<ExpertModel> train_all_regions(
    ExpertKind kind, const std::function<LabeledTable(RegionId)>& train_of,
    const std::function<LabeledTable(RegionId)>& val_of, const BoostedTrainConfig& boosted_cfg,
    const nn::TrainConfig& mlp_cfg, int jobs = 1);

// Boosted model file: "BOOST1 base_logit n_trees" then one
// "STUMP feature_idx threshold left right" line per stump.
void save_boosted(const BoostedModel& model, const std::string& path);
BoostedModel load_boosted(const std::string& path);

void save_expert(const ExpertModel& expert, const std::string& path);
ExpertModel load_expert(const std::string& path, RegionId region, ExpertKind kind);

}  // namespace amoe::experts
