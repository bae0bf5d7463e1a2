#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "amoe/descriptor.hpp"
#include "amoe/nn/layers.hpp"
#include "amoe/nn/train.hpp"
#include "amoe/volume.hpp"

namespace amoe::moe {

struct MoEConfig {
  std::size_t n_regions = 7;   // 5 in five-lobe mode
  std::size_t global_dim = 32; // configurable up to the paper-parity 384
  std::size_t expert_dim = 64;
  double lambda_gating = 0.005;
  double lambda_weight = 0.005;
  double lambda_diversity = 0.01;
  std::uint64_t seed = 42;
};

struct MoELossValues {
  double ce = 0;
  double gating = 0;
  double weight = 0;
  double diversity = 0;
  double total = 0;
};

/// Scalar reference of the four-component loss on given values: mean BCE,
/// entropy of the shared weight vector (eps = 1e-8), squared distance of w
/// from uniform, and mean off-diagonal |cos| of the expert features
/// (zero vectors count as orthogonal).
MoELossValues moe_losses(const std::vector<double>& probabilities, const std::vector<int>& labels,
                         const std::vector<double>& w,
                         const std::vector<std::vector<double>>& expert_features,
                         double lambda_gating = 0.005, double lambda_weight = 0.005,
                         double lambda_diversity = 0.01);

/// End-to-end head: pluggable pooled-descriptor backbone for global features,
/// per-region expert encoders producing 64-dim features and an attention
/// logit, a trainable expert weight vector (softplus reparameterized,
/// initialized from a gating strategy), and a classifier on the concatenated
/// [global; weighted expert] feature.
class MoEHead {
 public:
  MoEHead(MoEConfig cfg, const std::vector<double>& init_weights);

  const MoEConfig& config() const { return cfg_; }

  /// Current expert weights w_k = softplus(theta_k).
  std::vector<double> expert_weights() const;

  struct Forward {
    double probability = 0;
    std::vector<double> gate;            // g_k = w_k alpha_k / sum, sums to 1
    std::vector<double> expert_feature;  // weighted sum of phi_k
    std::vector<std::vector<double>> phi;  // per-region features
    std::vector<double> alpha;           // per-region attention in (0,1)
  };
  Forward forward(const std::vector<double>& global_desc,
                  const std::vector<std::vector<double>>& region_descs) const;
  Forward forward(const Volume3D& volume, const RegionMask& mask) const;

  struct Sample {
    std::vector<double> global_desc;                // 19
    std::vector<std::vector<double>> region_descs;  // n_regions x 19
    int label = 0;
  };

  /// Batched total loss (Eq-for-eq with moe_losses) on the tape.
  nn::Tape::Var loss_on_tape(nn::Tape& t, const std::vector<Sample>& samples,
                             const std::vector<std::size_t>& idx,
                             MoELossValues* parts = nullptr) const;

  std::vector<nn::Parameter*> backbone_params();
  std::vector<nn::Parameter*> head_params();  // experts + weights + classifier
  std::vector<nn::Parameter*> all_params();

 private:
  MoEConfig cfg_;
  nn::DenseLayer backbone_;
  std::vector<std::unique_ptr<nn::DenseLayer>> expert_enc_;
  std::vector<std::unique_ptr<nn::DenseLayer>> expert_att_;
  nn::Parameter theta_;  // w = softplus(theta)
  nn::DenseLayer cls1_, cls2_;

  friend struct MoEHeadTestAccess;
};

struct MoETrainConfig {
  double backbone_lr = 1e-5;
  double moe_lr = 1e-4;
  double weight_decay = 1e-4;
  int max_epochs = 60;
  int early_stop_patience = 15;
  double grad_clip_max_norm = 1.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
};

struct MoETrainHistory {
  std::vector<MoELossValues> epoch_losses;
  std::vector<double> val_auc;
  int best_epoch = -1;
};

/// Joint optimization with differentiated learning rates (backbone vs MoE
/// parameters) and cosine annealing on both groups; early stopping and best
/// restore on validation AUC.
MoETrainHistory train_moe(MoEHead& head, const std::vector<MoEHead::Sample>& train,
                          const std::vector<MoEHead::Sample>& val, const MoETrainConfig& cfg);

double moe_auc(const MoEHead& head, const std::vector<MoEHead::Sample>& samples);

}  // namespace amoe::moe
