#include <cmath>

#include "amoe/common.hpp"
#include "amoe/ensemble.hpp"
#include "amoe/moe.hpp"
#include "amoe/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amoe;
using namespace amoe::moe;

namespace amoe::moe {
struct MoEHeadTestAccess {
  /// Copies expert 0's encoder/attention parameters into every region so all
  /// alphas coincide on identical inputs.
  static void clone_expert0(MoEHead& h) {
    for (std::size_t k = 1; k < h.cfg_.n_regions; ++k) {
      h.expert_enc_[k]->W.value = h.expert_enc_[0]->W.value;
      h.expert_enc_[k]->b.value = h.expert_enc_[0]->b.value;
      h.expert_att_[k]->W.value = h.expert_att_[0]->W.value;
      h.expert_att_[k]->b.value = h.expert_att_[0]->b.value;
    }
  }
};
}  // namespace amoe::moe

namespace {

std::vector<double> random_descriptor(RandomStream& rng) {
  std::vector<double> d(kDescriptorDim, 0.0);
  d[0] = rng.uniform(-900, -400);
  d[1] = rng.uniform(500, 5000);
  double rest = 1.0;
  for (int b = 0; b < 15; ++b) {
    const double f = rng.next_double() * rest;
    d[2 + b] = f;
    rest -= f;
  }
  d[17] = rest;
  d[18] = rng.uniform(0.05, 0.5);
  return d;
}

MoEHead::Sample random_sample(RandomStream& rng, std::size_t k) {
  MoEHead::Sample s;
  s.global_desc = random_descriptor(rng);
  for (std::size_t i = 0; i < k; ++i) s.region_descs.push_back(random_descriptor(rng));
  s.label = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

}  // namespace

TEST_CASE("weighted ensemble: mean, one-hot, convexity") {
  std::vector<double> preds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  auto mean = weighted_ensemble(preds, std::vector<double>(7, 1.0 / 7));
  CHECK(mean.probability == doctest::Approx(0.4).epsilon(1e-12));

  std::vector<double> onehot(7, 0.0);
  onehot[2] = 1.0;
  CHECK(weighted_ensemble(preds, onehot).probability == doctest::Approx(0.3));

  RandomStream rng(8);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> p(7), w(7);
    double sum = 0;
    for (int i = 0; i < 7; ++i) {
      p[i] = rng.next_double();
      w[i] = rng.next_double() + 1e-6;
      sum += w[i];
    }
    for (auto& x : w) x /= sum;
    auto out = weighted_ensemble(p, w);
    const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
    REQUIRE(out.probability >= *mn - 1e-12);
    REQUIRE(out.probability <= *mx + 1e-12);
    double contrib_sum = 0;
    for (double c : out.contributions) contrib_sum += c;
    REQUIRE(out.probability == doctest::Approx(contrib_sum).epsilon(1e-12));
  }

  // Permuting experts and weights together leaves the output unchanged.
  std::vector<double> w{0.3, 0.05, 0.15, 0.1, 0.2, 0.12, 0.08};
  const double base = weighted_ensemble(preds, w).probability;
  std::vector<std::size_t> perm{6, 4, 2, 0, 1, 3, 5};
  std::vector<double> pp(7), wp(7);
  for (int i = 0; i < 7; ++i) {
    pp[i] = preds[perm[i]];
    wp[i] = w[perm[i]];
  }
  CHECK(weighted_ensemble(pp, wp).probability == doctest::Approx(base).epsilon(1e-12));

  CHECK_THROWS_AS(weighted_ensemble(preds, std::vector<double>(7, 0.2)), InvariantError);
}

TEST_CASE("val_auc_weights: ratios and scale invariance") {
  auto equal = val_auc_weights(std::vector<double>(7, 0.7));
  for (double w : equal) CHECK(w == doctest::Approx(1.0 / 7).epsilon(1e-12));

  std::vector<double> aucs{0.9, 0.8, 0.7, 0.6, 0.5, 0.85, 0.75};
  auto w = val_auc_weights(aucs);
  CHECK(w[0] == doctest::Approx(0.9 / 5.1).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(0.176471).epsilon(1e-6));

  std::vector<double> doubled;
  for (double a : aucs) doubled.push_back(2 * a);
  auto w2 = val_auc_weights(doubled);
  for (int i = 0; i < 7; ++i) CHECK(w2[i] == doctest::Approx(w[i]).epsilon(1e-12));

  CHECK_THROWS_AS(val_auc_weights(std::vector<double>(7, 0.0)), DataError);
}

TEST_CASE("hierarchical normalize: proportional split and idempotence") {
  auto [lobes, lungs] = hierarchical_normalize({0.1, 0.1, 0.1, 0.1, 0.1, 0.25, 0.25});
  for (double l : lobes) CHECK(l == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(lungs[0] == doctest::Approx(0.5));
  CHECK(lungs[1] == doctest::Approx(0.5));

  RandomStream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> w(7);
    for (auto& x : w) x = rng.next_double() + 1e-9;
    auto [lo, lu] = hierarchical_normalize(w);
    double ls = 0, gs = 0;
    for (double v : lo) ls += v;
    for (double v : lu) gs += v;
    REQUIRE(ls == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(gs == doctest::Approx(1.0).epsilon(1e-12));

    // Idempotence on the recombined vector.
    std::vector<double> recombined;
    recombined.insert(recombined.end(), lo.begin(), lo.end());
    recombined.insert(recombined.end(), lu.begin(), lu.end());
    auto [lo2, lu2] = hierarchical_normalize(recombined);
    for (int i = 0; i < 5; ++i) REQUIRE(lo2[i] == doctest::Approx(lo[i]).epsilon(1e-12));
    for (int i = 0; i < 2; ++i) REQUIRE(lu2[i] == doctest::Approx(lu[i]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(hierarchical_normalize({0, 0, 0, 0, 0, 0.5, 0.5}), DataError);
}

TEST_CASE("moe_losses: pinned component values") {
  std::vector<double> uniform_w(7, 1.0 / 7);
  std::vector<std::vector<double>> same_features(7, std::vector<double>{1.0, 2.0, 3.0});
  auto l = moe_losses({0.5, 0.5}, {0, 1}, uniform_w, same_features);
  CHECK(l.weight == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(l.gating == doctest::Approx(std::log(7.0)).epsilon(1e-6));
  CHECK(l.gating == doctest::Approx(1.945910).epsilon(1e-5));
  CHECK(l.diversity == doctest::Approx(42.0 / 49.0).epsilon(1e-8));
  CHECK(l.ce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(l.total == doctest::Approx(l.ce + 0.005 * l.gating + 0.005 * l.weight + 0.01 * l.diversity)
                       .epsilon(1e-12));

  // Mutually orthogonal features zero the diversity term.
  std::vector<std::vector<double>> ortho(7, std::vector<double>(7, 0.0));
  for (int i = 0; i < 7; ++i) ortho[i][i] = 2.0;
  auto lo = moe_losses({0.5}, {1}, uniform_w, ortho);
  CHECK(lo.diversity == doctest::Approx(0.0).epsilon(1e-10));

  // All components nonnegative on random inputs.
  RandomStream rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> probs(5), w(7);
    std::vector<int> labels(5);
    for (int i = 0; i < 5; ++i) {
      probs[i] = rng.next_double();
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    for (auto& x : w) x = rng.next_double() + 0.01;
    std::vector<std::vector<double>> feats(7, std::vector<double>(8));
    for (auto& f : feats) {
      for (auto& v : f) v = rng.normal(0, 1);
    }
    auto lv = moe_losses(probs, labels, w, feats);
    REQUIRE(lv.ce >= 0);
    REQUIRE(lv.gating >= -1e-6);
    REQUIRE(lv.weight >= 0);
    REQUIRE(lv.diversity >= 0);
  }
}

TEST_CASE("moe head: gate arithmetic") {
  RandomStream rng(21);
  MoEConfig cfg;
  cfg.seed = 11;

  // Uniform w + identical experts and descriptors -> uniform gate.
  {
    MoEHead head(cfg, std::vector<double>(7, 1.0 / 7));
    MoEHeadTestAccess::clone_expert0(head);
    auto d = random_descriptor(rng);
    auto f = head.forward(random_descriptor(rng), std::vector<std::vector<double>>(7, d));
    for (double g : f.gate) CHECK(g == doctest::Approx(1.0 / 7).epsilon(1e-9));
  }

  // One-hot w -> one-hot gate regardless of alpha (alpha > 0 always holds).
  {
    std::vector<double> init(7, 0.0);
    init[3] = 1.0;
    MoEHead head(cfg, init);
    auto s = random_sample(rng, 7);
    auto f = head.forward(s.global_desc, s.region_descs);
    // softplus clamps zeros to 1e-4, so "one-hot" means overwhelming mass.
    CHECK(f.gate[3] > 0.99);
    double sum = 0;
    for (double g : f.gate) sum += g;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Random head: gate on simplex, expert feature inside the coordinatewise hull.
  {
    MoEHead head(cfg, {0.2, 0.1, 0.15, 0.05, 0.2, 0.2, 0.1});
    for (int rep = 0; rep < 20; ++rep) {
      auto s = random_sample(rng, 7);
      auto f = head.forward(s.global_desc, s.region_descs);
      double sum = 0;
      for (double g : f.gate) {
        REQUIRE(g >= 0);
        sum += g;
      }
      REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-9));
      for (std::size_t c = 0; c < f.expert_feature.size(); ++c) {
        double mn = 1e300, mx = -1e300;
        for (const auto& phi : f.phi) {
          mn = std::min(mn, phi[c]);
          mx = std::max(mx, phi[c]);
        }
        REQUIRE(f.expert_feature[c] >= mn - 1e-9);
        REQUIRE(f.expert_feature[c] <= mx + 1e-9);
      }
    }
  }
}

TEST_CASE("moe loss on tape: agrees with the scalar reference") {
  RandomStream rng(77);
  MoEConfig cfg;
  cfg.global_dim = 8;
  cfg.expert_dim = 6;
  cfg.seed = 5;
  MoEHead head(cfg, std::vector<double>(7, 1.0 / 7));

  std::vector<MoEHead::Sample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(random_sample(rng, 7));
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};

  nn::Tape t;
  MoELossValues parts;
  head.loss_on_tape(t, samples, idx, &parts);

  // Reference: per-sample forwards, batch-mean phi per expert.
  std::vector<double> probs;
  std::vector<int> labels;
  std::vector<std::vector<double>> mean_phi(7, std::vector<double>(cfg.expert_dim, 0.0));
  for (const auto& s : samples) {
    auto f = head.forward(s.global_desc, s.region_descs);
    probs.push_back(f.probability);
    labels.push_back(s.label);
    for (int k = 0; k < 7; ++k) {
      for (std::size_t c = 0; c < cfg.expert_dim; ++c) mean_phi[k][c] += f.phi[k][c] / 6.0;
    }
  }
  auto ref = moe_losses(probs, labels, head.expert_weights(), mean_phi, cfg.lambda_gating,
                        cfg.lambda_weight, cfg.lambda_diversity);
  CHECK(parts.ce == doctest::Approx(ref.ce).epsilon(1e-9));
  CHECK(parts.gating == doctest::Approx(ref.gating).epsilon(1e-9));
  CHECK(parts.weight == doctest::Approx(ref.weight).epsilon(1e-9));
  CHECK(parts.diversity == doctest::Approx(ref.diversity).epsilon(1e-9));
  CHECK(parts.total == doctest::Approx(ref.total).epsilon(1e-9));
}

TEST_CASE("moe loss: gradient passes finite differences on a small head") {
  RandomStream rng(31);
  MoEConfig cfg;
  cfg.n_regions = 3;
  cfg.global_dim = 4;
  cfg.expert_dim = 4;
  cfg.seed = 9;
  MoEHead head(cfg, {0.5, 0.3, 0.2});

  std::vector<MoEHead::Sample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(random_sample(rng, 3));
  std::vector<std::size_t> idx{0, 1, 2, 3};

  auto params = head.all_params();
  auto loss_eval = [&]() {
    nn::Tape t;
    return t.value(head.loss_on_tape(t, samples, idx)).data[0];
  };
  auto compute_grads = [&]() {
    for (auto* p : params) p->zero_grad();
    nn::Tape t;
    auto loss = head.loss_on_tape(t, samples, idx);
    t.backward(loss);
  };
  const double err = oracle::fd_max_rel_err(params, loss_eval, compute_grads);
  CHECK(err < 1e-4);
}

TEST_CASE("train_moe: zero epochs leaves the head at initialization") {
  RandomStream rng(41);
  MoEConfig cfg;
  cfg.n_regions = 7;
  cfg.seed = 3;
  MoEHead head(cfg, std::vector<double>(7, 1.0 / 7));
  std::vector<nn::Tensor> before;
  for (auto* p : head.all_params()) before.push_back(p->value);

  std::vector<MoEHead::Sample> data;
  for (int i = 0; i < 10; ++i) data.push_back(random_sample(rng, 7));

  MoETrainConfig tcfg;
  tcfg.max_epochs = 0;
  CHECK_THROWS_AS(train_moe(head, {}, data, tcfg), DataError);  // empty train is an error

  // max_epochs 0: the loop body never runs, parameters stay put.
  auto hist = train_moe(head, data, data, tcfg);
  CHECK(hist.epoch_losses.empty());
  auto params = head.all_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    REQUIRE(params[i]->value.data == before[i].data);
  }
}
