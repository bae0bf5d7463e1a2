#include "amoe/nn/optim.hpp"

#include <cmath>

#include "amoe/common.hpp"

namespace amoe::nn {

void AdamW::step(std::vector<Parameter*>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      const double g = p->grad.data[i];
      if (!std::isfinite(g)) throw InvariantError("AdamW: NaN gradient in " + p->name);
      double& m = p->m1.data[i];
      double& v = p->m2.data[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value.data[i] -=
          cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p->value.data[i]);
    }
  }
}

double clip_grad_norm(std::vector<Parameter*>& params, double max_norm) {
  double sq = 0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  for (Parameter* p : params) {
    for (double& g : p->grad.data) g *= factor;
  }
  return factor;
}

double cosine_anneal(int epoch, int total, double lr0) {
  if (total <= 0 || epoch < 0 || epoch > total) throw UsageError("cosine_anneal: bad epoch/total");
  return lr0 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / static_cast<double>(total))) /
         2.0;
}

double PlateauReducer::update(double metric, double lr) {
  if (metric > best_) {
    best_ = metric;
    stale_ = 0;
    return lr;
  }
  if (++stale_ >= patience_) {
    stale_ = 0;
    return lr * 0.5;
  }
  return lr;
}

}  // namespace amoe::nn
