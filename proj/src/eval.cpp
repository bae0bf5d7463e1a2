#include "amoe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>

#include "amoe/common.hpp"
#include "amoe/rng.hpp"

namespace amoe {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw UsageError("auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw UsageError("auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: single-class labels");

  // Average ranks with midranks for ties, then Mann-Whitney.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

CvPlan make_cv_plan(const Cohort& cohort, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw UsageError("make_cv_plan: need >= 2 folds");
  std::vector<std::string> patients = cohort.patient_ids();
  std::sort(patients.begin(), patients.end());
  if (patients.size() < 10) throw DataError("make_cv_plan: too few patients");

  RandomStream rng = RandomStream::derived(seed, "cv_plan");
  rng.shuffle(patients);

  const std::size_t n = patients.size();
  const std::size_t nf = static_cast<std::size_t>(n_folds);
  CvPlan plan;
  plan.seed = seed;
  std::size_t start = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    std::size_t size = n / nf + (f < n % nf ? 1 : 0);
    FoldSplit split;
    split.fold = static_cast<int>(f);
    std::vector<std::string> holdout(patients.begin() + start, patients.begin() + start + size);
    start += size;
    const std::size_t n_val = (holdout.size() + 1) / 2;
    for (std::size_t k = 0; k < holdout.size(); ++k) {
      (k < n_val ? split.validation : split.test).insert(holdout[k]);
    }
    for (const auto& p : patients) {
      if (!split.validation.count(p) && !split.test.count(p)) split.train.insert(p);
    }
    plan.folds.push_back(std::move(split));
  }
  return plan;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  // Continued fraction (Lentz), with the symmetry transform for convergence.
  const double ln_front = a * std::log(x) + b * std::log(1 - x) + std::lgamma(a + b) -
                          std::lgamma(a) - std::lgamma(b);
  auto cf = [](double a_, double b_, double x_) {
    const double tiny = 1e-300;
    double c = 1.0, d = 1.0 - (a_ + b_) * x_ / (a_ + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const double m_ = m;
      double num = m_ * (b_ - m_) * x_ / ((a_ + 2 * m_ - 1) * (a_ + 2 * m_));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(a_ + m_) * (a_ + b_ + m_) * x_ / ((a_ + 2 * m_) * (a_ + 2 * m_ + 1));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double delta = d * c;
      h *= delta;
      if (std::fabs(delta - 1.0) < 1e-15) break;
    }
    return h;
  };
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * cf(a, b, x) / a;
  }
  return 1.0 - std::exp(b * std::log(1 - x) + a * std::log(x) + std::lgamma(a + b) -
                        std::lgamma(a) - std::lgamma(b)) *
                   cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (t == 0) return 0.5;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0 && p < 1)) throw UsageError("student_t_quantile: p in (0,1)");
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TTestResult paired_t_test(const std::vector<double>& deltas) {
  if (deltas.size() < 2) throw UsageError("paired_t_test: need n >= 2");
  const double n = static_cast<double>(deltas.size());
  double mean = 0;
  for (double d : deltas) mean += d;
  mean /= n;
  double ss = 0;
  for (double d : deltas) ss += (d - mean) * (d - mean);
  const double var = ss / (n - 1);

  TTestResult r;
  if (var == 0.0) {
    r.degenerate = true;
    r.p = 1.0;
    r.t = 0.0;
    return r;
  }
  r.t = mean / std::sqrt(var / n);
  const double df = n - 1;
  r.p = 2.0 * (1.0 - student_t_cdf(std::fabs(r.t), df));
  return r;
}

MethodResult summarize(const std::string& method, const std::vector<double>& fold_aucs) {
  if (fold_aucs.empty()) throw UsageError("summarize: no fold values");
  MethodResult m;
  m.method = method;
  m.fold_aucs = fold_aucs;
  const double n = static_cast<double>(fold_aucs.size());
  for (double a : fold_aucs) m.mean += a;
  m.mean /= n;
  if (fold_aucs.size() > 1) {
    double ss = 0;
    for (double a : fold_aucs) ss += (a - m.mean) * (a - m.mean);
    m.sd = std::sqrt(ss / (n - 1));
    const double tmul = student_t_quantile(0.975, n - 1);
    const double half = tmul * m.sd / std::sqrt(n);
    m.ci_lo = m.mean - half;
    m.ci_hi = m.mean + half;
  } else {
    m.ci_lo = m.ci_hi = m.mean;
  }
  return m;
}

std::vector<std::string> leakage_audit(const CvPlan& plan, const Cohort& cohort) {
  std::vector<std::string> violations;
  const auto patients_vec = cohort.patient_ids();
  const std::set<std::string> all(patients_vec.begin(), patients_vec.end());

  std::map<std::string, int> holdout_count;
  for (const auto& f : plan.folds) {
    const std::string tag = "fold " + std::to_string(f.fold) + ": ";
    for (const auto& p : f.train) {
      if (f.validation.count(p)) violations.push_back(tag + "patient in train and validation: " + p);
      if (f.test.count(p)) violations.push_back(tag + "patient in train and test: " + p);
    }
    for (const auto& p : f.validation) {
      if (f.test.count(p)) violations.push_back(tag + "patient in validation and test: " + p);
    }
    const std::size_t holdout = f.validation.size() + f.test.size();
    if (f.train.size() + holdout != all.size()) {
      violations.push_back(tag + "fold does not cover all patients");
    }
    const auto v = static_cast<long long>(f.validation.size());
    const auto t = static_cast<long long>(f.test.size());
    if (std::llabs(v - t) > 1) violations.push_back(tag + "validation/test sizes differ by > 1");
    for (const auto& p : f.validation) ++holdout_count[p];
    for (const auto& p : f.test) ++holdout_count[p];
    for (const auto& p : f.train) {
      if (!all.count(p)) violations.push_back(tag + "unknown patient: " + p);
    }
  }
  for (const auto& p : all) {
    const int c = holdout_count.count(p) ? holdout_count.at(p) : 0;
    if (c != 1) {
      violations.push_back("patient " + p + " appears " + std::to_string(c) +
                           " times in holdouts (want exactly 1)");
    }
  }
  return violations;
}

namespace {
double nn_score(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                const std::vector<std::size_t>& train, std::size_t query) {
  double best = std::numeric_limits<double>::infinity();
  double score = 0.5;
  for (std::size_t t : train) {
    double d2 = 0;
    for (std::size_t k = 0; k < features[t].size(); ++k) {
      const double d = features[t][k] - features[query][k];
      d2 += d * d;
    }
    if (d2 < best) {
      best = d2;
      score = static_cast<double>(labels[t]);
    }
  }
  return score;
}
}  // namespace

SplitInflation split_inflation_diagnostic(const std::vector<std::vector<double>>& features,
                                          const std::vector<int>& labels,
                                          const std::vector<std::string>& patient_ids,
                                          std::uint64_t seed) {
  if (features.size() != labels.size() || features.size() != patient_ids.size()) {
    throw UsageError("split_inflation_diagnostic: length mismatch");
  }
  const std::size_t n = features.size();
  RandomStream rng = RandomStream::derived(seed, "split_inflation");

  // Scan-level split: shuffle scans, 50/50.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<std::size_t> train_s(idx.begin(), idx.begin() + n / 2);
  std::vector<std::size_t> test_s(idx.begin() + n / 2, idx.end());

  // Patient-level split: shuffle patients, 50/50, scans follow their patient.
  std::set<std::string> uniq(patient_ids.begin(), patient_ids.end());
  std::vector<std::string> patients(uniq.begin(), uniq.end());
  rng.shuffle(patients);
  std::set<std::string> train_patients(patients.begin(),
                                       patients.begin() + patients.size() / 2);
  std::vector<std::size_t> train_p, test_p;
  for (std::size_t i = 0; i < n; ++i) {
    (train_patients.count(patient_ids[i]) ? train_p : test_p).push_back(i);
  }

  auto eval_split = [&](const std::vector<std::size_t>& train,
                        const std::vector<std::size_t>& test) {
    std::vector<double> scores;
    std::vector<int> ls;
    for (std::size_t q : test) {
      scores.push_back(nn_score(features, labels, train, q));
      ls.push_back(labels[q]);
    }
    return auc(scores, ls);
  };

  SplitInflation out;
  out.scan_level_auc = eval_split(train_s, test_s);
  out.patient_level_auc = eval_split(train_p, test_p);
  return out;
}

}  // namespace amoe
