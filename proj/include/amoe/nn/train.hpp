#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "amoe/nn/optim.hpp"
#include "amoe/nn/tape.hpp"

namespace amoe::nn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int max_epochs = 150;
  int early_stop_patience = 15;
  double grad_clip_max_norm = 1.0;
  enum class Scheduler { plateau, cosine, none };
  Scheduler scheduler = Scheduler::plateau;
  std::size_t batch_size = 32;
  double label_smoothing = 0.0;  // in [0, 0.5)
  std::uint64_t seed = 42;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_metric;
  int best_epoch = -1;  // 0-based
  double best_metric = 0;
};

/// Computes the loss for one shuffled batch of training indices.
using BatchLossFn = std::function<Tape::Var(Tape&, const std::vector<std::size_t>&)>;
/// Validation metric on the current parameter values; higher is better.
using MetricFn = std::function<double()>;

/// Seeded, single-threaded epoch loop: shuffled batches, AdamW with gradient
/// clipping, early stopping on the validation metric, best-epoch parameter
/// restore. Same seed and data give bit-identical trained parameters.
TrainHistory train_loop(std::vector<Parameter*> params, std::size_t n_train,
                        const BatchLossFn& batch_loss, const MetricFn& val_metric,
                        const TrainConfig& cfg);

}  // namespace amoe::nn
