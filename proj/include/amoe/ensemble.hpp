#pragma once

#include <string>
#include <utility>
#include <vector>

namespace amoe::moe {

struct EnsemblePrediction {
  std::string scan_id;
  double probability = 0;
  std::vector<double> contributions;  // w_k * yhat_k
};

/// Weighted ensemble probability sum_k w_k yhat_k. Weights must lie on the
/// simplex (sum within 1e-6).
EnsemblePrediction weighted_ensemble(const std::vector<double>& predictions,
                                     const std::vector<double>& weights,
                                     const std::string& scan_id = {});

/// w_k = AUC_k / sum_j AUC_j.
std::vector<double> val_auc_weights(const std::vector<double>& aucs);

/// Renormalizes the first five entries (lobes) among themselves and the last
/// two (lungs) among themselves. Requires positive group sums.
std::pair<std::vector<double>, std::vector<double>> hierarchical_normalize(
    const std::vector<double>& weights7);

}  // namespace amoe::moe
