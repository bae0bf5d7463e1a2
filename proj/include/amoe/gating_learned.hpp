#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "amoe/gating.hpp"
#include "amoe/nn/layers.hpp"
#include "amoe/nn/train.hpp"

namespace amoe::gating {

enum class GateArch { mlp, attention, transformer };

const std::string& arch_name(GateArch a);
GateArch arch_from_name(const std::string& name);

/// Learned gating network producing one logit per expert.
///
/// Architectures:
///   mlp         -- flattened expert features -> 64 -> 32 -> n_experts.
///                  `input_dim` is the full flattened dimension.
///   attention   -- the per-expert feature vectors form an n_experts-token
///                  sequence: projection to 64, 4-head self-attention, then a
///                  shared per-token MLP head (64 -> 32 -> 1). `input_dim` is
///                  the per-token dimension.
///   transformer -- layernorm(projection), residual attention + layernorm,
///                  residual MLP + layernorm, shared per-token head (-> 1).
class LearnedGatingNet {
 public:
  LearnedGatingNet(GateArch arch, std::size_t n_experts, std::size_t input_dim,
                   std::uint64_t seed);

  GateArch arch() const { return arch_; }
  std::size_t n_experts() const { return n_experts_; }

  /// Logits for one sample; `phis` holds n_experts feature vectors. For the
  /// mlp architecture they are concatenated in expert order. Returns [1, K].
  nn::Tape::Var logits(nn::Tape& t, const std::vector<std::vector<double>>& phis) const;

  std::vector<double> logits_values(const std::vector<std::vector<double>>& phis) const;

  GatingWeights weights(const std::vector<std::vector<double>>& phis, GateNorm norm) const;

  std::vector<nn::Parameter*> params();
  std::size_t param_count() const;

  /// Zeroes the head layer so every expert starts with an equal logit.
  void zero_head();

 private:
  GateArch arch_;
  std::size_t n_experts_;
  std::size_t input_dim_;

  // mlp
  std::unique_ptr<nn::DenseLayer> fc1_, fc2_, fc3_;
  // attention / transformer
  std::unique_ptr<nn::DenseLayer> proj_;
  std::unique_ptr<nn::MultiHeadAttention> attn_;
  std::unique_ptr<nn::LayerNormLayer> ln1_, ln2_, ln3_;
  std::unique_ptr<nn::DenseLayer> ffn1_, ffn2_;
  std::unique_ptr<nn::DenseLayer> head1_, head2_;
};

/// One gating training sample: frozen expert features and probabilities.
struct GateSample {
  std::vector<std::vector<double>> phis;  // n_experts vectors
  std::vector<double> expert_probs;       // n_experts
  int label = 0;
};

/// Trains the gate through the differentiable weighting of frozen expert
/// probabilities: BCE(sum_k w_k yhat_k, y) + lambda * (-sum_k w_k log(w_k + 1e-8)).
/// Validation metric is the ensemble AUC under the trained gate.
nn::TrainHistory train_learned_gate(LearnedGatingNet& net, GateNorm norm,
                                    const std::vector<GateSample>& train,
                                    const std::vector<GateSample>& val,
                                    const nn::TrainConfig& cfg, double entropy_lambda = 0.01);

/// Ensemble AUC of a trained gate over a sample set.
double gate_ensemble_auc(const LearnedGatingNet& net, GateNorm norm,
                         const std::vector<GateSample>& samples);

}  // namespace amoe::gating
