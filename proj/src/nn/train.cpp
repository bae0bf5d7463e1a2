#include "amoe/nn/train.hpp"

#include <limits>
#include <numeric>

#include "amoe/common.hpp"
#include "amoe/rng.hpp"

namespace amoe::nn {

void TrainConfig::validate() const {
  if (learning_rate < 0 || weight_decay < 0) throw UsageError("train: negative lr/decay");
  if (max_epochs < 1) throw UsageError("train: max_epochs >= 1");
  if (early_stop_patience < 1) throw UsageError("train: patience >= 1");
  if (grad_clip_max_norm <= 0) throw UsageError("train: grad clip must be > 0");
  if (batch_size < 1) throw UsageError("train: batch_size >= 1");
  if (!(label_smoothing >= 0 && label_smoothing < 0.5)) {
    throw UsageError("train: label_smoothing in [0, 0.5)");
  }
}

TrainHistory train_loop(std::vector<Parameter*> params, std::size_t n_train,
                        const BatchLossFn& batch_loss, const MetricFn& val_metric,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (n_train == 0) throw DataError("train_loop: empty data");

  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.learning_rate;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW opt(opt_cfg);
  PlateauReducer plateau(5);
  RandomStream rng = RandomStream::derived(cfg.seed, "train_loop");

  TrainHistory hist;
  hist.best_metric = -std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_values;
  int stale = 0;

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (cfg.scheduler == TrainConfig::Scheduler::cosine) {
      opt.set_lr(cosine_anneal(epoch, cfg.max_epochs, cfg.learning_rate));
    }
    rng.shuffle(order);

    double loss_sum = 0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t end = std::min(n_train, start + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
      Tape tape;
      for (Parameter* p : params) p->zero_grad();
      Tape::Var loss = batch_loss(tape, batch);
      loss_sum += tape.value(loss).data[0];
      ++n_batches;
      tape.backward(loss);
      clip_grad_norm(params, cfg.grad_clip_max_norm);
      opt.step(params);
    }
    hist.train_loss.push_back(loss_sum / static_cast<double>(n_batches));

    const double metric = val_metric();
    hist.val_metric.push_back(metric);
    if (metric > hist.best_metric) {
      hist.best_metric = metric;
      hist.best_epoch = epoch;
      best_values.clear();
      for (Parameter* p : params) best_values.push_back(p->value);
      stale = 0;
    } else {
      ++stale;
      if (stale >= cfg.early_stop_patience) break;
    }
    if (cfg.scheduler == TrainConfig::Scheduler::plateau) {
      opt.set_lr(plateau.update(metric, opt.lr()));
    }
  }

  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }
  return hist;
}

}  // namespace amoe::nn
