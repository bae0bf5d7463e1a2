#pragma once

#include <cstdint>
#include <vector>

#include "amoe/nn/tensor.hpp"

namespace amoe::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled-weight-decay Adam with bias-corrected moments. `step` is the
/// 1-based update count shared by all parameters in the group.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(std::vector<Parameter*>& params);
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

/// Scales all gradients so the global L2 norm is at most max_norm.
/// Returns the applied factor (1 when no clipping happened).
double clip_grad_norm(std::vector<Parameter*>& params, double max_norm);

/// lr0 * (1 + cos(pi * epoch / total)) / 2.
double cosine_anneal(int epoch, int total, double lr0);

/// Halves the learning rate after `patience` consecutive epochs without
/// improvement of the (higher-is-better) metric history.
class PlateauReducer {
 public:
  explicit PlateauReducer(int patience = 5) : patience_(patience) {}
  double update(double metric, double lr);

 private:
  int patience_;
  int stale_ = 0;
  double best_ = -1e300;
};

}  // namespace amoe::nn
