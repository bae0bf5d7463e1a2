#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "amoe/cohort.hpp"

namespace amoe {

/// Rank-based AUC: probability that a random positive outscores a random
/// negative, ties counted 0.5. Throws if only one class is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct FoldSplit {
  int fold = 0;
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;
};

struct CvPlan {
  std::vector<FoldSplit> folds;
  std::uint64_t seed = 0;
};

/// Patient-level cross-validation: patients are shuffled by seed and split
/// into n_folds holdout groups; each fold trains on the remaining patients and
/// halves its holdout into validation (first ceil(h/2)) and test.
CvPlan make_cv_plan(const Cohort& cohort, int n_folds, std::uint64_t seed);

struct TTestResult {
  double t = 0;
  double p = 1.0;
  bool degenerate = false;  // zero-variance differences
};

/// Two-sided paired t-test on per-fold differences (df = n-1).
TTestResult paired_t_test(const std::vector<double>& deltas);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

/// Quantile of Student's t (bisection on the CDF).
double student_t_quantile(double p, double df);

struct MethodResult {
  std::string method;
  std::vector<double> fold_aucs;
  double mean = 0;
  double sd = 0;  // sample SD (n-1)
  double ci_lo = 0, ci_hi = 0;  // mean +- t_{0.975,n-1} * sd / sqrt(n)
  double p_vs_baseline = 1.0;
  bool p_degenerate = false;
};

MethodResult summarize(const std::string& method, const std::vector<double>& fold_aucs);

/// Checks every split invariant of the plan against the cohort. Returns the
/// list of violations (empty means the plan is sound).
std::vector<std::string> leakage_audit(const CvPlan& plan, const Cohort& cohort);

/// Diagnostic: nearest-neighbour scores under a scan-level vs a patient-level
/// split of the same data. With per-patient shared disease status, the
/// scan-level split leaks patient identity and inflates AUC.
struct SplitInflation {
  double scan_level_auc = 0;
  double patient_level_auc = 0;
};
SplitInflation split_inflation_diagnostic(const std::vector<std::vector<double>>& features,
                                          const std::vector<int>& labels,
                                          const std::vector<std::string>& patient_ids,
                                          std::uint64_t seed);

}  // namespace amoe
