#include "amoe/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amoe/common.hpp"
#include "amoe/stats.hpp"

namespace amoe::gating {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw UsageError(std::string(what) + ": empty input");
  for (double x : v) {
    if (!std::isfinite(x)) throw UsageError(std::string(what) + ": non-finite input");
  }
}

GatingWeights from_scores(std::vector<double> scores, const char* strategy, bool dynamic) {
  GatingWeights w;
  w.values = softmax(scores);
  w.strategy = strategy;
  w.sample_dependent = dynamic;
  w.validate();
  return w;
}

}  // namespace

const std::vector<std::string>& strategy_order() {
  static const std::vector<std::string> order = {
      "auc_softmax", "auc_sigmoid", "auc_sparsemax", "confidence",      "error",
      "diversity",   "magnitude",   "variance",      "entropy",         "learned_softmax",
      "learned_sigmoid",
  };
  return order;
}

void GatingWeights::validate(double tol) const {
  double sum = 0;
  for (double v : values) {
    if (!(v >= 0.0)) throw InvariantError("gating weight < 0 (" + strategy + ")");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > tol) {
    throw InvariantError("gating weights sum " + fmt_double(sum) + " != 1 (" + strategy + ")");
  }
}

std::vector<double> softmax(const std::vector<double>& z) {
  check_finite(z, "softmax");
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double denom = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

std::vector<double> sparsemax(const std::vector<double>& z) {
  check_finite(z, "sparsemax");
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0;
  double tau = 0;
  std::size_t support = 0;
  double support_sum = 0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumsum += sorted[k];
    if (1.0 + static_cast<double>(k + 1) * sorted[k] > cumsum) {
      support = k + 1;
      support_sum = cumsum;
    }
  }
  tau = (support_sum - 1.0) / static_cast<double>(support);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(z[i] - tau, 0.0);
  return out;
}

GatingWeights auc_softmax(const std::vector<double>& aucs) {
  return from_scores(aucs, "auc_softmax", false);
}

GatingWeights auc_sigmoid(const std::vector<double>& aucs) {
  check_finite(aucs, "auc_sigmoid");
  GatingWeights w;
  w.strategy = "auc_sigmoid";
  w.values.resize(aucs.size());
  double denom = 0;
  for (std::size_t i = 0; i < aucs.size(); ++i) {
    w.values[i] = 1.0 / (1.0 + std::exp(-aucs[i]));
    denom += w.values[i];
  }
  for (double& v : w.values) v /= denom;
  w.validate();
  return w;
}

GatingWeights auc_sparsemax(const std::vector<double>& aucs) {
  GatingWeights w;
  w.values = sparsemax(aucs);
  w.strategy = "auc_sparsemax";
  w.validate();
  return w;
}

GatingWeights confidence_gate(const std::vector<double>& predictions) {
  check_finite(predictions, "confidence_gate");
  std::vector<double> scores(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    scores[i] = 2.0 * std::fabs(predictions[i] - 0.5);
  }
  return from_scores(std::move(scores), "confidence", true);
}

GatingWeights error_gate(const std::vector<double>& predictions, int label) {
  check_finite(predictions, "error_gate");
  if (label != 0 && label != 1) throw UsageError("error_gate: label must be 0/1");
  std::vector<double> scores(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    scores[i] = -std::fabs(predictions[i] - static_cast<double>(label));
  }
  return from_scores(std::move(scores), "error", true);
}

GatingWeights diversity_gate(const std::vector<std::vector<double>>& val_predictions) {
  if (val_predictions.size() < 3) throw UsageError("diversity_gate: need >= 3 samples");
  const std::size_t k = val_predictions[0].size();
  std::vector<std::vector<double>> columns(k, std::vector<double>(val_predictions.size()));
  for (std::size_t i = 0; i < val_predictions.size(); ++i) {
    if (val_predictions[i].size() != k) throw UsageError("diversity_gate: ragged matrix");
    for (std::size_t e = 0; e < k; ++e) columns[e][i] = val_predictions[i][e];
  }
  std::vector<double> scores(k);
  for (std::size_t a = 0; a < k; ++a) {
    double rho_sum = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      rho_sum += pearson(columns[a], columns[b]);  // zero-variance experts correlate 0
    }
    scores[a] = 1.0 - rho_sum / static_cast<double>(k - 1);
  }
  return from_scores(std::move(scores), "diversity", false);
}

GatingWeights magnitude_gate(const std::vector<std::vector<double>>& phis) {
  std::vector<double> scores(phis.size());
  for (std::size_t i = 0; i < phis.size(); ++i) {
    check_finite(phis[i], "magnitude_gate");
    double sq = 0;
    for (double x : phis[i]) sq += x * x;
    scores[i] = std::sqrt(sq);
  }
  return from_scores(std::move(scores), "magnitude", true);
}

GatingWeights variance_gate(const std::vector<std::vector<double>>& phis) {
  std::vector<double> scores(phis.size());
  for (std::size_t i = 0; i < phis.size(); ++i) {
    check_finite(phis[i], "variance_gate");
    scores[i] = population_variance(phis[i]);
  }
  return from_scores(std::move(scores), "variance", true);
}

GatingWeights entropy_gate(const std::vector<std::vector<double>>& phis) {
  std::vector<double> scores(phis.size());
  for (std::size_t i = 0; i < phis.size(); ++i) {
    check_finite(phis[i], "entropy_gate");
    const Histogram h = histogram(phis[i], 20);
    scores[i] = shannon_entropy(h.probabilities(), 1e-10);
  }
  return from_scores(std::move(scores), "entropy", true);
}

const std::string& norm_name(GateNorm n) {
  static const std::string sm = "learned_softmax";
  static const std::string sg = "learned_sigmoid";
  return n == GateNorm::softmax ? sm : sg;
}

GatingWeights normalize_learned(const std::vector<double>& logits, GateNorm mode) {
  check_finite(logits, "normalize_learned");
  GatingWeights w;
  w.strategy = norm_name(mode);
  w.sample_dependent = true;
  if (mode == GateNorm::softmax) {
    w.values = softmax(logits);
  } else {
    w.values.resize(logits.size());
    double denom = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      w.values[i] = 1.0 / (1.0 + std::exp(-logits[i]));
      denom += w.values[i];
    }
    for (double& v : w.values) v /= denom;
  }
  w.validate();
  return w;
}

std::size_t select_best_strategy(const std::vector<StrategyCandidate>& candidates) {
  if (candidates.empty()) throw UsageError("select_best_strategy: empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].val_auc > candidates[best].val_auc) best = i;
  }
  return best;
}

}  // namespace amoe::gating
