#pragma once

#include <string>
#include <vector>

namespace amoe::gating {

/// Documented strategy order; ties in best-strategy selection resolve to the
/// earlier entry of this list.
const std::vector<std::string>& strategy_order();

/// Nonnegative weights on the probability simplex. Softmax-family gates are
/// strictly positive; only sparsemax emits exact zeros.
struct GatingWeights {
  std::vector<double> values;
  std::string strategy;
  bool sample_dependent = false;

  void validate(double tol = 1e-9) const;
};

std::vector<double> softmax(const std::vector<double>& z);

/// Euclidean projection of z onto the probability simplex (sort-based
/// threshold algorithm).
std::vector<double> sparsemax(const std::vector<double>& z);

// Performance-based gates over validation AUCs.
GatingWeights auc_softmax(const std::vector<double>& aucs);
GatingWeights auc_sigmoid(const std::vector<double>& aucs);
GatingWeights auc_sparsemax(const std::vector<double>& aucs);

// Dynamic gates over per-sample expert predictions.
GatingWeights confidence_gate(const std::vector<double>& predictions);
/// Needs the ground-truth label; deployed frozen (validation average).
GatingWeights error_gate(const std::vector<double>& predictions, int label);

/// Static gate from the validation prediction matrix [n_samples][n_experts]:
/// softmax(1 - mean Pearson correlation against the other experts).
GatingWeights diversity_gate(const std::vector<std::vector<double>>& val_predictions);

// Feature gates over per-sample expert feature vectors.
GatingWeights magnitude_gate(const std::vector<std::vector<double>>& phis);
GatingWeights variance_gate(const std::vector<std::vector<double>>& phis);
/// Shannon entropy of a 20-bin histogram over each vector's own range
/// (natural log, eps = 1e-10 inside the log).
GatingWeights entropy_gate(const std::vector<std::vector<double>>& phis);

enum class GateNorm { softmax, sigmoid };
const std::string& norm_name(GateNorm n);

/// Final normalization of learned-gate logits: softmax(z), or
/// sigmoid(z_k) / sum_j sigmoid(z_j).
GatingWeights normalize_learned(const std::vector<double>& logits, GateNorm mode);

struct StrategyCandidate {
  std::string id;
  double val_auc = 0;
};

/// Argmax of validation ensemble AUC; exact ties resolve to the earliest
/// candidate in list order. Returns the index into `candidates`.
std::size_t select_best_strategy(const std::vector<StrategyCandidate>& candidates);

}  // namespace amoe::gating
