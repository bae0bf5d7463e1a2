#include "amoe/gating_learned.hpp"

#include <algorithm>
#include <cmath>

#include "amoe/common.hpp"
#include "amoe/eval.hpp"
#include "amoe/rng.hpp"

namespace amoe::gating {

namespace {
constexpr std::size_t kModelDim = 64;
constexpr std::size_t kHeads = 4;
constexpr std::size_t kHeadHidden = 32;
}  // namespace

const std::string& arch_name(GateArch a) {
  static const std::string names[3] = {"mlp", "attention", "transformer"};
  return names[static_cast<int>(a)];
}

GateArch arch_from_name(const std::string& name) {
  for (int i = 0; i < 3; ++i) {
    if (arch_name(static_cast<GateArch>(i)) == name) return static_cast<GateArch>(i);
  }
  throw DataError("unknown gating architecture: " + name);
}

LearnedGatingNet::LearnedGatingNet(GateArch arch, std::size_t n_experts, std::size_t input_dim,
                                   std::uint64_t seed)
    : arch_(arch), n_experts_(n_experts), input_dim_(input_dim) {
  if (input_dim == 0 || n_experts == 0) throw UsageError("gating net: empty dims");
  RandomStream rng = RandomStream::derived(seed, "gating_net_init");
  switch (arch) {
    case GateArch::mlp:
      fc1_ = std::make_unique<nn::DenseLayer>("gate.fc1", input_dim, 64, rng);
      fc2_ = std::make_unique<nn::DenseLayer>("gate.fc2", 64, 32, rng);
      fc3_ = std::make_unique<nn::DenseLayer>("gate.fc3", 32, n_experts, rng);
      break;
    case GateArch::attention:
      proj_ = std::make_unique<nn::DenseLayer>("gate.proj", input_dim, kModelDim, rng);
      attn_ = std::make_unique<nn::MultiHeadAttention>("gate.attn", kModelDim, kHeads, rng);
      head1_ = std::make_unique<nn::DenseLayer>("gate.head1", kModelDim, kHeadHidden, rng);
      head2_ = std::make_unique<nn::DenseLayer>("gate.head2", kHeadHidden, 1, rng);
      break;
    case GateArch::transformer:
      proj_ = std::make_unique<nn::DenseLayer>("gate.proj", input_dim, kModelDim, rng);
      ln1_ = std::make_unique<nn::LayerNormLayer>("gate.ln1", kModelDim);
      attn_ = std::make_unique<nn::MultiHeadAttention>("gate.attn", kModelDim, kHeads, rng);
      ln2_ = std::make_unique<nn::LayerNormLayer>("gate.ln2", kModelDim);
      ffn1_ = std::make_unique<nn::DenseLayer>("gate.ffn1", kModelDim, kModelDim, rng);
      ffn2_ = std::make_unique<nn::DenseLayer>("gate.ffn2", kModelDim, kModelDim, rng);
      ln3_ = std::make_unique<nn::LayerNormLayer>("gate.ln3", kModelDim);
      head1_ = std::make_unique<nn::DenseLayer>("gate.head", kModelDim, 1, rng);
      break;
  }
}

nn::Tape::Var LearnedGatingNet::logits(nn::Tape& t,
                                       const std::vector<std::vector<double>>& phis) const {
  if (phis.size() != n_experts_) throw DataError("gating net: wrong expert count");

  if (arch_ == GateArch::mlp) {
    nn::Tensor x({1, input_dim_});
    std::size_t off = 0;
    for (const auto& phi : phis) {
      for (double v : phi) {
        if (off >= input_dim_) throw DataError("gating net: input dim overflow");
        x.data[off++] = v;
      }
    }
    if (off != input_dim_) throw DataError("gating net: input dim mismatch");
    auto h1 = t.relu(fc1_->forward(t, t.constant(std::move(x))));
    auto h2 = t.relu(fc2_->forward(t, h1));
    return fc3_->forward(t, h2);  // [1, K]
  }

  nn::Tensor tokens({n_experts_, input_dim_});
  for (std::size_t k = 0; k < n_experts_; ++k) {
    if (phis[k].size() != input_dim_) throw DataError("gating net: token dim mismatch");
    std::copy(phis[k].begin(), phis[k].end(),
              tokens.data.begin() + static_cast<long>(k * input_dim_));
  }
  auto x = t.constant(std::move(tokens));

  if (arch_ == GateArch::attention) {
    auto h = proj_->forward(t, x);
    auto a = attn_->forward_self(t, h);
    auto h1 = t.relu(head1_->forward(t, a));
    auto z = head2_->forward(t, h1);  // [K, 1]
    return t.transpose(z);            // [1, K]
  }

  // transformer
  auto h = ln1_->forward(t, proj_->forward(t, x));
  auto a = ln2_->forward(t, t.add(attn_->forward_self(t, h), h));
  auto f = t.relu(ffn1_->forward(t, a));
  auto m = ln3_->forward(t, t.add(ffn2_->forward(t, f), a));
  auto z = head1_->forward(t, m);  // [K, 1]
  return t.transpose(z);
}

std::vector<double> LearnedGatingNet::logits_values(
    const std::vector<std::vector<double>>& phis) const {
  nn::Tape t;
  auto z = logits(t, phis);
  return t.value(z).data;
}

GatingWeights LearnedGatingNet::weights(const std::vector<std::vector<double>>& phis,
                                        GateNorm norm) const {
  return normalize_learned(logits_values(phis), norm);
}

std::vector<nn::Parameter*> LearnedGatingNet::params() {
  std::vector<nn::Parameter*> ps;
  auto push_dense = [&ps](std::unique_ptr<nn::DenseLayer>& l) {
    if (l) {
      for (auto* p : l->params()) ps.push_back(p);
    }
  };
  auto push_ln = [&ps](std::unique_ptr<nn::LayerNormLayer>& l) {
    if (l) {
      for (auto* p : l->params()) ps.push_back(p);
    }
  };
  push_dense(fc1_);
  push_dense(fc2_);
  push_dense(fc3_);
  push_dense(proj_);
  if (attn_) {
    for (auto* p : attn_->params()) ps.push_back(p);
  }
  push_ln(ln1_);
  push_ln(ln2_);
  push_ln(ln3_);
  push_dense(ffn1_);
  push_dense(ffn2_);
  push_dense(head1_);
  push_dense(head2_);
  return ps;
}

std::size_t LearnedGatingNet::param_count() const {
  std::size_t n = 0;
  for (const auto* p : const_cast<LearnedGatingNet*>(this)->params()) n += p->value.numel();
  return n;
}

void LearnedGatingNet::zero_head() {
  nn::DenseLayer* head = arch_ == GateArch::mlp ? fc3_.get()
                          : arch_ == GateArch::attention ? head2_.get()
                                                         : head1_.get();
  std::fill(head->W.value.data.begin(), head->W.value.data.end(), 0.0);
  std::fill(head->b.value.data.begin(), head->b.value.data.end(), 0.0);
}

namespace {

/// Simplex weights on the tape for one sample's logits [1, K].
nn::Tape::Var weights_on_tape(nn::Tape& t, nn::Tape::Var logits, GateNorm norm) {
  if (norm == GateNorm::softmax) return t.row_softmax(logits);
  auto s = t.sigmoid(logits);
  auto denom = t.row_sum(s);  // [1,1]
  auto recip = t.div(t.constant(nn::Tensor({1, 1}, 1.0)), denom);
  return t.scale_rows(s, recip);
}

}  // namespace

nn::TrainHistory train_learned_gate(LearnedGatingNet& net, GateNorm norm,
                                    const std::vector<GateSample>& train,
                                    const std::vector<GateSample>& val,
                                    const nn::TrainConfig& cfg, double entropy_lambda) {
  if (train.empty()) throw DataError("train_learned_gate: empty training set");
  auto params = net.params();

  auto batch_loss = [&](nn::Tape& t, const std::vector<std::size_t>& idx) {
    std::vector<nn::Tape::Var> probs, entropies;
    nn::Tensor targets({idx.size(), 1});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const GateSample& s = train[idx[i]];
      auto w = weights_on_tape(t, net.logits(t, s.phis), norm);
      auto p = t.row_sum(t.mul(w, t.constant(nn::Tensor::row(s.expert_probs))));  // [1,1]
      probs.push_back(p);
      // -sum w log(w + 1e-8)
      auto wlogw = t.row_sum(t.mul(w, t.log_op(t.add_scalar(w, 1e-8))));
      entropies.push_back(wlogw);
      targets.data[i] = static_cast<double>(s.label);
    }
    auto p_all = t.concat_rows(probs);
    auto bce = t.bce_with_probs(p_all, targets, cfg.label_smoothing);
    auto ent = t.scalar_mul(t.mean(t.concat_rows(entropies)), -1.0);
    return t.add(bce, t.scalar_mul(ent, entropy_lambda));
  };
  auto metric = [&]() { return gate_ensemble_auc(net, norm, val); };

  return nn::train_loop(params, train.size(), batch_loss, metric, cfg);
}

double gate_ensemble_auc(const LearnedGatingNet& net, GateNorm norm,
                         const std::vector<GateSample>& samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(samples.size());
  for (const auto& s : samples) {
    const GatingWeights w = net.weights(s.phis, norm);
    double p = 0;
    for (std::size_t k = 0; k < w.values.size(); ++k) p += w.values[k] * s.expert_probs[k];
    scores.push_back(p);
    labels.push_back(s.label);
  }
  try {
    return auc(scores, labels);
  } catch (const DataError&) {
    return 0.5;
  }
}

}  // namespace amoe::gating
