#include "amoe/ensemble.hpp"

#include <cmath>

#include "amoe/common.hpp"

namespace amoe::moe {

EnsemblePrediction weighted_ensemble(const std::vector<double>& predictions,
                                     const std::vector<double>& weights,
                                     const std::string& scan_id) {
  if (predictions.size() != weights.size() || predictions.empty()) {
    throw UsageError("weighted_ensemble: size mismatch");
  }
  double sum = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw InvariantError("weighted_ensemble: negative weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw InvariantError("weighted_ensemble: weight sum " + fmt_double(sum));
  }
  EnsemblePrediction out;
  out.scan_id = scan_id;
  out.contributions.resize(predictions.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    out.contributions[k] = weights[k] * predictions[k];
    out.probability += out.contributions[k];
  }
  return out;
}

std::vector<double> val_auc_weights(const std::vector<double>& aucs) {
  if (aucs.empty()) throw UsageError("val_auc_weights: empty");
  double sum = 0;
  for (double a : aucs) {
    if (!(a >= 0)) throw UsageError("val_auc_weights: negative AUC");
    sum += a;
  }
  if (sum <= 0) throw DataError("val_auc_weights: all-zero AUCs");
  std::vector<double> w(aucs.size());
  for (std::size_t k = 0; k < aucs.size(); ++k) w[k] = aucs[k] / sum;
  return w;
}

std::pair<std::vector<double>, std::vector<double>> hierarchical_normalize(
    const std::vector<double>& weights7) {
  if (weights7.size() != 7) throw UsageError("hierarchical_normalize: need 7 weights");
  double lobe_sum = 0, lung_sum = 0;
  for (int i = 0; i < 5; ++i) lobe_sum += weights7[i];
  for (int i = 5; i < 7; ++i) lung_sum += weights7[i];
  if (!(lobe_sum > 0) || !(lung_sum > 0)) {
    throw DataError("hierarchical_normalize: zero group sum");
  }
  std::vector<double> lobes(5), lungs(2);
  for (int i = 0; i < 5; ++i) lobes[i] = weights7[i] / lobe_sum;
  for (int i = 0; i < 2; ++i) lungs[i] = weights7[5 + i] / lung_sum;
  return {lobes, lungs};
}

}  // namespace amoe::moe
