#include <cmath>

#include "amoe/common.hpp"
#include "amoe/eval.hpp"
#include "amoe/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amoe;

namespace {
Cohort synthetic_cohort(int n_patients, int scans_each = 1) {
  Cohort c;
  for (int p = 0; p < n_patients; ++p) {
    for (int s = 0; s < scans_each; ++s) {
      ScanRecord r;
      r.patient_id = "p" + std::to_string(p);
      r.scan_id = r.patient_id + "_s" + std::to_string(s);
      r.label = p % 2;
      c.records.push_back(r);
    }
  }
  c.rebuild_index();
  return c;
}
}  // namespace

TEST_CASE("auc: pinned examples") {
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(auc({0.4, 0.3, 0.2, 0.8}, {0, 1, 0, 1}) == doctest::Approx(0.75));
  CHECK(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), DataError);
}

TEST_CASE("auc: equals pairwise-concordance brute force on random sets") {
  RandomStream rng(4242);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 5 + static_cast<int>(rng.index(195));
    std::vector<double> scores;
    std::vector<int> labels;
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // Coarse grid so ties actually occur.
      scores.push_back(rng.index(10) / 10.0);
      labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
      has0 |= labels.back() == 0;
      has1 |= labels.back() == 1;
    }
    if (!has0) labels[0] = 0;
    if (!has1) labels[1] = 1;
    REQUIRE(auc(scores, labels) == doctest::Approx(oracle::auc_bruteforce(scores, labels))
                                        .epsilon(1e-12));
  }
}

TEST_CASE("auc: monotone-transform invariance and score negation") {
  RandomStream rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      scores.push_back(rng.normal(0, 1));
      labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    const double base = auc(scores, labels);
    std::vector<double> warped;
    for (double s : scores) warped.push_back(std::exp(0.7 * s) + 3);
    CHECK(auc(warped, labels) == doctest::Approx(base).epsilon(1e-12));
    std::vector<double> negated;
    for (double s : scores) negated.push_back(-s);
    CHECK(auc(negated, labels) + base == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cv plan: 10 patients give 8/1/1 folds") {
  Cohort c = synthetic_cohort(10);
  CvPlan plan = make_cv_plan(c, 5, 42);
  REQUIRE(plan.folds.size() == 5);
  for (const auto& f : plan.folds) {
    CHECK(f.train.size() == 8);
    CHECK(f.validation.size() == 1);
    CHECK(f.test.size() == 1);
  }
  CHECK(leakage_audit(plan, c).empty());
}

TEST_CASE("cv plan: determinism and holdout coverage on random cohorts") {
  RandomStream rng(1);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 10 + static_cast<int>(rng.index(80));
    Cohort c = synthetic_cohort(n, 1 + static_cast<int>(rng.index(3)));
    const std::uint64_t seed = rng.next_u64();
    CvPlan a = make_cv_plan(c, 5, seed);
    CvPlan b = make_cv_plan(c, 5, seed);
    for (int f = 0; f < 5; ++f) {
      REQUIRE(a.folds[f].train == b.folds[f].train);
      REQUIRE(a.folds[f].validation == b.folds[f].validation);
      REQUIRE(a.folds[f].test == b.folds[f].test);
    }
    REQUIRE(leakage_audit(a, c).empty());
  }
}

TEST_CASE("leakage audit: injected fault is detected and named") {
  Cohort c = synthetic_cohort(20);
  CvPlan plan = make_cv_plan(c, 5, 7);
  const std::string leaked = *plan.folds[0].test.begin();
  plan.folds[0].train.insert(leaked);
  auto violations = leakage_audit(plan, c);
  REQUIRE(!violations.empty());
  bool named = false;
  for (const auto& v : violations) named = named || v.find(leaked) != std::string::npos;
  CHECK(named);
}

TEST_CASE("paired t-test: degenerate cases and quadrature oracle") {
  auto zero = paired_t_test({0, 0, 0, 0, 0});
  CHECK(zero.degenerate);
  CHECK(zero.p == 1.0);

  auto ones = paired_t_test({1, 1, 1, 1, 1});
  CHECK(ones.degenerate);

  const std::vector<double> deltas{0.05, 0.08, 0.02, 0.06, 0.04};
  auto r = paired_t_test(deltas);
  CHECK(!r.degenerate);
  // t = dbar / (s / sqrt(5)); verify p against Simpson quadrature of the
  // t density at df = 4.
  const double p_oracle = oracle::t_two_sided_p_quadrature(std::fabs(r.t), 4.0);
  CHECK(r.p == doctest::Approx(p_oracle).epsilon(1e-6));
  CHECK(r.t > 0);
}

TEST_CASE("student t: cdf/quantile round trip and known value") {
  // t_{0.975, 4} = 2.7764451051977987 (standard table value)
  CHECK(student_t_quantile(0.975, 4) == doctest::Approx(2.7764451051977987).epsilon(1e-9));
  for (double p : {0.6, 0.9, 0.975, 0.995}) {
    const double q = student_t_quantile(p, 7);
    CHECK(student_t_cdf(q, 7) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("summarize: pinned arithmetic") {
  auto constant = summarize("m", {0.8, 0.8, 0.8, 0.8, 0.8});
  CHECK(constant.mean == doctest::Approx(0.8));
  CHECK(constant.sd == doctest::Approx(0.0));
  CHECK(constant.ci_lo == doctest::Approx(0.8));
  CHECK(constant.ci_hi == doctest::Approx(0.8));

  auto r = summarize("m", {0.7, 0.8, 0.9, 0.75, 0.85});
  CHECK(r.mean == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(r.sd == doctest::Approx(0.07905694150420949).epsilon(1e-10));
  CHECK(r.ci_lo <= r.mean);
  CHECK(r.ci_hi >= r.mean);

  // Permutation invariance.
  auto r2 = summarize("m", {0.9, 0.7, 0.85, 0.8, 0.75});
  CHECK(r2.mean == doctest::Approx(r.mean).epsilon(1e-15));
  CHECK(r2.sd == doctest::Approx(r.sd).epsilon(1e-15));
}

TEST_CASE("split inflation: scan-level split inflates AUC for twin scans") {
  // Patients have two near-identical scans and a patient-specific signature
  // feature that is label-independent; a nearest-neighbour score can only
  // exploit it when the twin leaks into the training half.
  RandomStream rng(99);
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::vector<std::string> patients;
  for (int p = 0; p < 60; ++p) {
    const int label = rng.bernoulli(0.5) ? 1 : 0;
    const double signature = rng.normal(0, 10);
    const double weak = label + rng.normal(0, 2.5);  // weak genuine signal
    for (int s = 0; s < 2; ++s) {
      features.push_back({signature + rng.normal(0, 0.01), weak + rng.normal(0, 0.5)});
      labels.push_back(label);
      patients.push_back("p" + std::to_string(p));
    }
  }
  auto d = split_inflation_diagnostic(features, labels, patients, 31);
  CHECK(d.scan_level_auc >= d.patient_level_auc);
}
