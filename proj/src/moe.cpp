#include "amoe/moe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "amoe/common.hpp"
#include "amoe/eval.hpp"
#include "amoe/rng.hpp"

namespace amoe::moe {

namespace {

constexpr double kWeightEps = 1e-8;   // inside log of the gating entropy
constexpr double kNormEps = 1e-12;    // cosine norm guard; zero vectors stay orthogonal

double softplus(double x) {
  return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
}

/// theta with softplus(theta) = w, w clamped away from 0.
double softplus_inverse(double w) {
  const double v = std::max(w, 1e-4);
  return v > 30.0 ? v : std::log(std::expm1(v));
}

}  // namespace

MoELossValues moe_losses(const std::vector<double>& probabilities, const std::vector<int>& labels,
                         const std::vector<double>& w,
                         const std::vector<std::vector<double>>& expert_features,
                         double lambda_gating, double lambda_weight, double lambda_diversity) {
  if (probabilities.size() != labels.size() || probabilities.empty()) {
    throw UsageError("moe_losses: empty or mismatched batch");
  }
  const std::size_t k = w.size();
  if (expert_features.size() != k) throw UsageError("moe_losses: feature/weight count mismatch");

  MoELossValues out;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], 1e-7, 1.0 - 1e-7);
    out.ce -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  out.ce /= static_cast<double>(probabilities.size());

  for (double wk : w) out.gating -= wk * std::log(wk + kWeightEps);

  const double uniform = 1.0 / static_cast<double>(k);
  for (double wk : w) out.weight += (wk - uniform) * (wk - uniform);

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t c = 0; c < expert_features[i].size(); ++c) {
        dot += expert_features[i][c] * expert_features[j][c];
        ni += expert_features[i][c] * expert_features[i][c];
        nj += expert_features[j][c] * expert_features[j][c];
      }
      const double denom = (std::sqrt(ni) + kNormEps) * (std::sqrt(nj) + kNormEps);
      out.diversity += std::fabs(dot / denom);
    }
  }
  out.diversity /= static_cast<double>(k * k);

  out.total = out.ce + lambda_gating * out.gating + lambda_weight * out.weight +
              lambda_diversity * out.diversity;
  return out;
}

MoEHead::MoEHead(MoEConfig cfg, const std::vector<double>& init_weights)
    : cfg_(cfg),
      backbone_([&] {
        RandomStream rng = RandomStream::derived(cfg.seed, "moe_backbone");
        return nn::DenseLayer("moe.backbone", kDescriptorDim, cfg.global_dim, rng);
      }()),
      theta_("moe.theta", nn::Tensor({1, cfg.n_regions})),
      cls1_([&] {
        RandomStream rng = RandomStream::derived(cfg.seed, "moe_cls1");
        return nn::DenseLayer("moe.cls1", cfg.global_dim + cfg.expert_dim, 32, rng);
      }()),
      cls2_([&] {
        RandomStream rng = RandomStream::derived(cfg.seed, "moe_cls2");
        return nn::DenseLayer("moe.cls2", 32, 1, rng);
      }()) {
  if (init_weights.size() != cfg_.n_regions) {
    throw UsageError("MoEHead: init weight count != n_regions");
  }
  for (std::size_t k = 0; k < cfg_.n_regions; ++k) {
    RandomStream rng = RandomStream::derived(cfg.seed, "moe_expert_" + std::to_string(k));
    expert_enc_.push_back(std::make_unique<nn::DenseLayer>(
        "moe.expert" + std::to_string(k) + ".enc", kDescriptorDim, cfg_.expert_dim, rng));
    expert_att_.push_back(std::make_unique<nn::DenseLayer>(
        "moe.expert" + std::to_string(k) + ".att", cfg_.expert_dim, 1, rng));
    theta_.value.data[k] = softplus_inverse(init_weights[k]);
  }
}

std::vector<double> MoEHead::expert_weights() const {
  std::vector<double> w(cfg_.n_regions);
  for (std::size_t k = 0; k < cfg_.n_regions; ++k) w[k] = softplus(theta_.value.data[k]);
  return w;
}

namespace {

std::vector<double> scaled_desc(const std::vector<double>& d) {
  if (d.size() != kDescriptorDim) throw DataError("MoE: descriptor length mismatch");
  std::vector<double> s = d;
  s[0] *= 1e-3;
  s[1] *= 1e-5;
  return s;
}

}  // namespace

MoEHead::Forward MoEHead::forward(const std::vector<double>& global_desc,
                                  const std::vector<std::vector<double>>& region_descs) const {
  if (region_descs.size() != cfg_.n_regions) throw DataError("MoE: region count mismatch");
  auto* self = const_cast<MoEHead*>(this);

  nn::Tape t;
  nn::Tensor g({1, kDescriptorDim});
  g.data = scaled_desc(global_desc);
  auto gfeat = t.relu(self->backbone_.forward(t, t.constant(std::move(g))));

  std::vector<nn::Tape::Var> phis, alphas;
  for (std::size_t k = 0; k < cfg_.n_regions; ++k) {
    nn::Tensor x({1, kDescriptorDim});
    x.data = scaled_desc(region_descs[k]);
    auto phi = t.relu(self->expert_enc_[k]->forward(t, t.constant(std::move(x))));
    phis.push_back(phi);
    alphas.push_back(t.sigmoid(self->expert_att_[k]->forward(t, phi)));
  }

  auto alpha_row = t.concat_cols(alphas);                           // [1, K]
  auto w_row = t.softplus(t.param(self->theta_));                   // [1, K]
  auto gate_unnorm = t.mul(alpha_row, w_row);                       // [1, K]
  auto denom = t.row_sum(gate_unnorm);                              // [1, 1]
  auto gate = t.scale_rows(gate_unnorm, t.div(t.constant(nn::Tensor({1, 1}, 1.0)), denom));

  nn::Tape::Var expert_feat{};
  for (std::size_t k = 0; k < cfg_.n_regions; ++k) {
    auto contrib = t.scale_rows(phis[k], t.slice_cols(gate, k, k + 1));
    expert_feat = k == 0 ? contrib : t.add(expert_feat, contrib);
  }

  auto combined = t.concat_cols({gfeat, expert_feat});
  auto h = t.relu(self->cls1_.forward(t, combined));
  auto p = t.sigmoid(self->cls2_.forward(t, h));

  Forward out;
  out.probability = std::clamp(t.value(p).data[0], 1e-7, 1.0 - 1e-7);
  out.gate = t.value(gate).data;
  out.expert_feature = t.value(expert_feat).data;
  for (std::size_t k = 0; k < cfg_.n_regions; ++k) {
    out.phi.push_back(t.value(phis[k]).data);
    out.alpha.push_back(t.value(alphas[k]).data[0]);
  }
  return out;
}

MoEHead::Forward MoEHead::forward(const Volume3D& volume, const RegionMask& mask) const {
  std::vector<std::vector<double>> regions;
  for (std::size_t k = 0; k < cfg_.n_regions; ++k) {
    regions.push_back(region_descriptor(volume, mask, static_cast<RegionId>(k)));
  }
  return forward(lung_descriptor(volume, mask), regions);
}

nn::Tape::Var MoEHead::loss_on_tape(nn::Tape& t, const std::vector<Sample>& samples,
                                    const std::vector<std::size_t>& idx,
                                    MoELossValues* parts) const {
  if (idx.empty()) throw UsageError("MoE loss: empty batch");
  auto* self = const_cast<MoEHead*>(this);
  const std::size_t n = idx.size();
  const std::size_t K = cfg_.n_regions;

  nn::Tensor g({n, kDescriptorDim});
  nn::Tensor labels({n, 1});
  std::vector<nn::Tensor> region_x(K, nn::Tensor({n, kDescriptorDim}));
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[idx[i]];
    if (s.region_descs.size() != K) throw DataError("MoE: region count mismatch");
    const auto gs = scaled_desc(s.global_desc);
    std::copy(gs.begin(), gs.end(), g.data.begin() + static_cast<long>(i * kDescriptorDim));
    for (std::size_t k = 0; k < K; ++k) {
      const auto rs = scaled_desc(s.region_descs[k]);
      std::copy(rs.begin(), rs.end(),
                region_x[k].data.begin() + static_cast<long>(i * kDescriptorDim));
    }
    labels.data[i] = static_cast<double>(s.label);
  }

  auto gfeat = t.relu(self->backbone_.forward(t, t.constant(std::move(g))));

  std::vector<nn::Tape::Var> phis, alphas;
  for (std::size_t k = 0; k < K; ++k) {
    auto phi = t.relu(self->expert_enc_[k]->forward(t, t.constant(std::move(region_x[k]))));
    phis.push_back(phi);
    alphas.push_back(t.sigmoid(self->expert_att_[k]->forward(t, phi)));  // [n,1]
  }

  auto alpha = t.concat_cols(alphas);           // [n, K]
  auto w_row = t.softplus(t.param(self->theta_));  // [1, K]
  // g_ik = w_k alpha_ik / sum_j w_j alpha_ij
  auto unnorm = t.mul_rowvec(alpha, w_row);
  auto denom = t.row_sum(unnorm);
  auto gate = t.scale_rows(unnorm, t.div(t.constant(nn::Tensor({n, 1}, 1.0)), denom));

  nn::Tape::Var expert_feat{};
  for (std::size_t k = 0; k < K; ++k) {
    auto contrib = t.scale_rows(phis[k], t.slice_cols(gate, k, k + 1));
    expert_feat = k == 0 ? contrib : t.add(expert_feat, contrib);
  }

  auto combined = t.concat_cols({gfeat, expert_feat});
  auto h = t.relu(self->cls1_.forward(t, combined));
  auto p = t.sigmoid(self->cls2_.forward(t, h));

  auto l_ce = t.bce_with_probs(p, labels, 0.0);

  // L_gating = -sum_k w_k log(w_k + eps)
  auto l_gating =
      t.scalar_mul(t.sum(t.mul(w_row, t.log_op(t.add_scalar(w_row, kWeightEps)))), -1.0);

  // L_weight = ||w - 1/K||^2
  auto w_centered = t.add_scalar(w_row, -1.0 / static_cast<double>(K));
  auto l_weight = t.sum(t.mul(w_centered, w_centered));

  // L_diversity over batch-mean expert features.
  std::vector<nn::Tape::Var> mu;
  nn::Tensor ones_row({1, n}, 1.0 / static_cast<double>(n));
  auto mean_lhs = t.constant(std::move(ones_row));
  for (std::size_t k = 0; k < K; ++k) mu.push_back(t.matmul(mean_lhs, phis[k]));  // [1, D]
  auto phi_mat = t.concat_rows(mu);                                               // [K, D]
  auto norms = t.sqrt_op(t.row_sum(t.mul(phi_mat, phi_mat)));                     // [K, 1]
  auto normed = t.scale_rows(
      phi_mat, t.div(t.constant(nn::Tensor({K, 1}, 1.0)), t.add_scalar(norms, kNormEps)));
  auto cos = t.abs_op(t.matmul(normed, t.transpose(normed)));  // [K, K]
  nn::Tensor offdiag({K, K}, 1.0);
  for (std::size_t k = 0; k < K; ++k) offdiag.data[k * K + k] = 0.0;
  auto l_div = t.scalar_mul(t.sum(t.mul(cos, t.constant(std::move(offdiag)))),
                            1.0 / static_cast<double>(K * K));

  auto total = t.add(
      t.add(l_ce, t.scalar_mul(l_gating, cfg_.lambda_gating)),
      t.add(t.scalar_mul(l_weight, cfg_.lambda_weight), t.scalar_mul(l_div, cfg_.lambda_diversity)));

  if (parts) {
    parts->ce = t.value(l_ce).data[0];
    parts->gating = t.value(l_gating).data[0];
    parts->weight = t.value(l_weight).data[0];
    parts->diversity = t.value(l_div).data[0];
    parts->total = t.value(total).data[0];
  }
  return total;
}

std::vector<nn::Parameter*> MoEHead::backbone_params() { return backbone_.params(); }

std::vector<nn::Parameter*> MoEHead::head_params() {
  std::vector<nn::Parameter*> ps;
  for (auto& e : expert_enc_) {
    for (auto* p : e->params()) ps.push_back(p);
  }
  for (auto& a : expert_att_) {
    for (auto* p : a->params()) ps.push_back(p);
  }
  ps.push_back(&theta_);
  for (auto* p : cls1_.params()) ps.push_back(p);
  for (auto* p : cls2_.params()) ps.push_back(p);
  return ps;
}

std::vector<nn::Parameter*> MoEHead::all_params() {
  auto ps = backbone_params();
  for (auto* p : head_params()) ps.push_back(p);
  return ps;
}

double moe_auc(const MoEHead& head, const std::vector<MoEHead::Sample>& samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : samples) {
    scores.push_back(head.forward(s.global_desc, s.region_descs).probability);
    labels.push_back(s.label);
  }
  try {
    return auc(scores, labels);
  } catch (const DataError&) {
    return 0.5;
  }
}

MoETrainHistory train_moe(MoEHead& head, const std::vector<MoEHead::Sample>& train,
                          const std::vector<MoEHead::Sample>& val, const MoETrainConfig& cfg) {
  if (train.empty()) throw DataError("train_moe: empty training set");

  auto backbone = head.backbone_params();
  auto moe_params = head.head_params();
  auto all = head.all_params();

  nn::AdamWConfig bc;
  bc.lr = cfg.backbone_lr;
  bc.weight_decay = cfg.weight_decay;
  nn::AdamW opt_backbone(bc);
  nn::AdamWConfig mc;
  mc.lr = cfg.moe_lr;
  mc.weight_decay = cfg.weight_decay;
  nn::AdamW opt_moe(mc);

  RandomStream rng = RandomStream::derived(cfg.seed, "train_moe");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  MoETrainHistory hist;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::vector<nn::Tensor> best_values;
  int stale = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    opt_backbone.set_lr(nn::cosine_anneal(epoch, cfg.max_epochs, cfg.backbone_lr));
    opt_moe.set_lr(nn::cosine_anneal(epoch, cfg.max_epochs, cfg.moe_lr));
    rng.shuffle(order);

    MoELossValues epoch_loss;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
      nn::Tape tape;
      for (auto* p : all) p->zero_grad();
      MoELossValues parts;
      auto loss = head.loss_on_tape(tape, train, batch, &parts);
      tape.backward(loss);
      nn::clip_grad_norm(all, cfg.grad_clip_max_norm);
      opt_backbone.step(backbone);
      opt_moe.step(moe_params);
      epoch_loss.ce += parts.ce;
      epoch_loss.gating += parts.gating;
      epoch_loss.weight += parts.weight;
      epoch_loss.diversity += parts.diversity;
      epoch_loss.total += parts.total;
      ++n_batches;
    }
    const double nb = static_cast<double>(n_batches);
    epoch_loss.ce /= nb;
    epoch_loss.gating /= nb;
    epoch_loss.weight /= nb;
    epoch_loss.diversity /= nb;
    epoch_loss.total /= nb;
    hist.epoch_losses.push_back(epoch_loss);

    const double metric = val.empty() ? -epoch_loss.total : moe_auc(head, val);
    hist.val_auc.push_back(metric);
    if (metric > best_metric) {
      best_metric = metric;
      hist.best_epoch = epoch;
      best_values.clear();
      for (auto* p : all) best_values.push_back(p->value);
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }

  if (!best_values.empty()) {
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_values[i];
  }
  return hist;
}

}  // namespace amoe::moe
