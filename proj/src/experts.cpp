#include "amoe/experts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "amoe/common.hpp"
#include "amoe/eval.hpp"
#include "amoe/nn/checkpoint.hpp"
#include "amoe/rng.hpp"

namespace amoe::experts {

namespace {

constexpr double kProbEps = 1e-7;

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Fixed diagonal input scaling: HU mean ~1e3, HU variance ~1e5, histogram
// fractions and occupancy already O(1).
std::vector<double> scaled_descriptor(const std::vector<double>& d) {
  if (d.size() != kDescriptorDim) throw DataError("descriptor length mismatch");
  std::vector<double> s = d;
  s[0] *= 1e-3;
  s[1] *= 1e-5;
  return s;
}

double validation_auc_or_half(const std::vector<double>& scores, const std::vector<int>& labels) {
  try {
    return auc(scores, labels);
  } catch (const DataError&) {
    return 0.5;  // single-class validation split
  }
}

}  // namespace

const std::string& kind_name(ExpertKind k) {
  static const std::string boosted = "boosted";
  static const std::string mlp = "mlp";
  return k == ExpertKind::boosted_radiomics ? boosted : mlp;
}

ExpertKind kind_from_name(const std::string& name) {
  if (name == "boosted") return ExpertKind::boosted_radiomics;
  if (name == "mlp") return ExpertKind::mlp_pooled;
  throw DataError("unknown expert kind: " + name);
}

double BoostedModel::logit(const std::vector<double>& features) const {
  double f = base_logit;
  for (const Stump& s : stumps) f += s.eval(features);
  return f;
}

MlpNet::MlpNet(std::uint64_t init_seed)
    : l1_([&] {
        RandomStream rng = RandomStream::derived(init_seed, "mlp_expert_init");
        return nn::DenseLayer("mlp.l1", kDescriptorDim, 32, rng);
      }()),
      l2_([&] {
        RandomStream rng = RandomStream::derived(init_seed, "mlp_expert_init_l2");
        return nn::DenseLayer("mlp.l2", 32, kPhiDim, rng);
      }()),
      l3_([&] {
        RandomStream rng = RandomStream::derived(init_seed, "mlp_expert_init_l3");
        return nn::DenseLayer("mlp.l3", kPhiDim, 1, rng);
      }()) {}

MlpNet::Output MlpNet::forward(const std::vector<double>& descriptor) const {
  const std::vector<double> x = scaled_descriptor(descriptor);
  std::vector<double> h1(32, 0.0);
  for (std::size_t o = 0; o < 32; ++o) {
    double a = l1_.b.value.data[o];
    for (std::size_t i = 0; i < kDescriptorDim; ++i) a += l1_.W.value.at(o, i) * x[i];
    h1[o] = a > 0 ? a : 0.0;
  }
  Output out;
  out.phi.assign(kPhiDim, 0.0);
  for (std::size_t o = 0; o < kPhiDim; ++o) {
    double a = l2_.b.value.data[o];
    for (std::size_t i = 0; i < 32; ++i) a += l2_.W.value.at(o, i) * h1[i];
    out.phi[o] = a > 0 ? a : 0.0;
  }
  double z = l3_.b.value.data[0];
  for (std::size_t i = 0; i < kPhiDim; ++i) z += l3_.W.value.at(0, i) * out.phi[i];
  out.probability = clamp_prob(sigmoid(z));
  return out;
}

nn::Tape::Var MlpNet::forward_batch(nn::Tape& t,
                                    const std::vector<std::vector<double>>& descriptors,
                                    nn::Tape::Var* phi_out) const {
  nn::Tensor x({descriptors.size(), kDescriptorDim});
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto s = scaled_descriptor(descriptors[i]);
    std::copy(s.begin(), s.end(), x.data.begin() + static_cast<long>(i * kDescriptorDim));
  }
  auto h1 = t.relu(l1_.forward(t, t.constant(std::move(x))));
  auto h2 = t.relu(l2_.forward(t, h1));
  if (phi_out) *phi_out = h2;
  return t.sigmoid(l3_.forward(t, h2));
}

std::vector<nn::Parameter*> MlpNet::params() {
  std::vector<nn::Parameter*> ps;
  for (auto* l : {&l1_, &l2_, &l3_}) {
    for (auto* p : l->params()) ps.push_back(p);
  }
  return ps;
}

std::vector<const nn::Parameter*> MlpNet::params() const {
  auto mut = const_cast<MlpNet*>(this)->params();
  return {mut.begin(), mut.end()};
}

std::size_t ExpertModel::phi_dim() const {
  return kind == ExpertKind::boosted_radiomics ? 39 : MlpNet::kPhiDim;
}

ExpertOutput predict(const ExpertModel& expert, const ScanRegionData& input) {
  ExpertOutput out;
  if (expert.kind == ExpertKind::boosted_radiomics) {
    out.probability = clamp_prob(sigmoid(expert.boosted.logit(input.radiomics)));
    out.phi = input.radiomics;
  } else {
    auto r = expert.mlp->forward(input.descriptor);
    out.probability = r.probability;
    out.phi = std::move(r.phi);
  }
  return out;
}

ExpertModel train_boosted_expert(const LabeledTable& train, const LabeledTable& val,
                                 RegionId region, const BoostedTrainConfig& cfg) {
  const std::size_t n = train.size();
  if (n == 0) throw DataError("train_boosted_expert: empty training set");
  const std::size_t d = train.x[0].size();

  std::size_t n_pos = 0;
  for (int y : train.y) n_pos += static_cast<std::size_t>(y);
  if (n_pos == 0 || n_pos == n) throw DataError("train_boosted_expert: single-class labels");

  ExpertModel model;
  model.region = region;
  model.kind = ExpertKind::boosted_radiomics;
  const double prior = std::clamp(static_cast<double>(n_pos) / static_cast<double>(n), 1e-6,
                                  1.0 - 1e-6);
  model.boosted.base_logit = std::log(prior / (1.0 - prior));

  // Pre-sorted feature orders; reused every round.
  std::vector<std::vector<std::size_t>> order(d, std::vector<std::size_t>(n));
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(order[j].begin(), order[j].end(), std::size_t{0});
    std::sort(order[j].begin(), order[j].end(), [&](std::size_t a, std::size_t b) {
      if (train.x[a][j] != train.x[b][j]) return train.x[a][j] < train.x[b][j];
      return a < b;
    });
  }

  std::vector<double> logit(n, model.boosted.base_logit);
  std::vector<double> residual(n);

  for (int round = 0; round < cfg.rounds; ++round) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = static_cast<double>(train.y[i]) - sigmoid(logit[i]);
      total += residual[i];
    }

    double best_gain = -1e300;
    Stump best;
    bool found = false;
    for (std::size_t j = 0; j < d; ++j) {
      double left_sum = 0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const std::size_t idx = order[j][k];
        left_sum += residual[idx];
        const double v = train.x[idx][j];
        const double v_next = train.x[order[j][k + 1]][j];
        if (v == v_next) continue;  // split only between distinct values
        const double n_l = static_cast<double>(k + 1);
        const double n_r = static_cast<double>(n - k - 1);
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / n_l + right_sum * right_sum / n_r;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best.feature = static_cast<int>(j);
          best.threshold = (v + v_next) / 2.0;
          best.left = cfg.shrinkage * (left_sum / n_l);
          best.right = cfg.shrinkage * (right_sum / n_r);
          found = true;
        }
      }
    }
    if (!found) break;  // constant features: keep the prior model

    model.boosted.stumps.push_back(best);
    for (std::size_t i = 0; i < n; ++i) logit[i] += best.eval(train.x[i]);
  }

  std::vector<double> val_scores;
  val_scores.reserve(val.size());
  for (const auto& x : val.x) {
    val_scores.push_back(clamp_prob(sigmoid(model.boosted.logit(x))));
  }
  model.validation_auc = validation_auc_or_half(val_scores, val.y);
  return model;
}

ExpertModel train_mlp_expert(const LabeledTable& train, const LabeledTable& val, RegionId region,
                             const nn::TrainConfig& cfg) {
  if (train.size() == 0) throw DataError("train_mlp_expert: empty training set");

  ExpertModel model;
  model.region = region;
  model.kind = ExpertKind::mlp_pooled;
  model.mlp = std::make_shared<MlpNet>(cfg.seed);
  auto params = model.mlp->params();

  auto batch_loss = [&](nn::Tape& t, const std::vector<std::size_t>& idx) {
    std::vector<std::vector<double>> batch;
    nn::Tensor targets({idx.size(), 1});
    batch.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      batch.push_back(train.x[idx[i]]);
      targets.data[i] = static_cast<double>(train.y[idx[i]]);
    }
    return t.bce_with_probs(model.mlp->forward_batch(t, batch), targets, cfg.label_smoothing);
  };
  auto metric = [&]() {
    std::vector<double> scores;
    scores.reserve(val.size());
    for (const auto& x : val.x) scores.push_back(model.mlp->forward(x).probability);
    return validation_auc_or_half(scores, val.y);
  };

  nn::train_loop(params, train.size(), batch_loss, metric, cfg);
  model.validation_auc = metric();
  return model;
}

std::vector<ExpertModel> train_all_regions(
    ExpertKind kind, const std::function<LabeledTable(RegionId)>& train_of,
    const std::function<LabeledTable(RegionId)>& val_of, const BoostedTrainConfig& boosted_cfg,
    const nn::TrainConfig& mlp_cfg, int jobs) {
  std::vector<ExpertModel> experts(kNumRegions);
  parallel_for(kNumRegions, jobs, [&](std::size_t r) {
    const RegionId region = static_cast<RegionId>(r);
    const LabeledTable train = train_of(region);
    const LabeledTable val = val_of(region);

    // Patient purity is structural; verify anyway.
    std::set<std::string> train_patients(train.patient_ids.begin(), train.patient_ids.end());
    for (const auto& pid : val.patient_ids) {
      if (train_patients.count(pid)) {
        throw InvariantError("patient purity violation: " + pid);
      }
    }

    if (kind == ExpertKind::boosted_radiomics) {
      BoostedTrainConfig cfg = boosted_cfg;
      cfg.seed = fnv1a(region_name(region), boosted_cfg.seed);
      experts[r] = train_boosted_expert(train, val, region, cfg);
    } else {
      nn::TrainConfig cfg = mlp_cfg;
      cfg.seed = fnv1a(region_name(region), mlp_cfg.seed);
      experts[r] = train_mlp_expert(train, val, region, cfg);
    }
  });
  return experts;
}

void save_boosted(const BoostedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "BOOST1 " << fmt_double(model.base_logit) << ' ' << model.stumps.size() << '\n';
  for (const Stump& s : model.stumps) {
    out << "STUMP " << s.feature << ' ' << fmt_double(s.threshold) << ' ' << fmt_double(s.left)
        << ' ' << fmt_double(s.right) << '\n';
  }
}

BoostedModel load_boosted(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string magic;
  std::size_t n_trees = 0;
  BoostedModel model;
  in >> magic >> model.base_logit >> n_trees;
  if (magic != "BOOST1") throw DataError("bad boosted model header in " + path);
  for (std::size_t i = 0; i < n_trees; ++i) {
    std::string tag;
    Stump s;
    if (!(in >> tag >> s.feature >> s.threshold >> s.left >> s.right) || tag != "STUMP") {
      throw DataError("bad stump record in " + path);
    }
    model.stumps.push_back(s);
  }
  return model;
}

void save_expert(const ExpertModel& expert, const std::string& path) {
  if (expert.kind == ExpertKind::boosted_radiomics) {
    save_boosted(expert.boosted, path);
  } else {
    nn::save_checkpoint(path, expert.mlp->params());
  }
}

ExpertModel load_expert(const std::string& path, RegionId region, ExpertKind kind) {
  ExpertModel model;
  model.region = region;
  model.kind = kind;
  if (kind == ExpertKind::boosted_radiomics) {
    model.boosted = load_boosted(path);
  } else {
    model.mlp = std::make_shared<MlpNet>(0);
    auto params = model.mlp->params();
    nn::load_checkpoint(path, params);
  }
  return model;
}

}  // namespace amoe::experts
