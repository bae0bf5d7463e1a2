#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace amoe {

/// Equal-width histogram. Final bin is right-closed so the range maximum lands
/// in the last bin instead of falling off the end.
struct Histogram {
  std::vector<double> edges;  // n_bins + 1, strictly ascending (or degenerate when lo == hi)
  std::vector<std::size_t> counts;
  std::size_t total = 0;

  std::vector<double> probabilities() const;
};

/// Bins `values` into n_bins equal-width bins. With no explicit range the
/// bins span [min, max] of the data; a constant input occupies a single bin.
Histogram histogram(const std::vector<double>& values, std::size_t n_bins,
                    std::optional<std::pair<double, double>> range = std::nullopt);

/// Pearson correlation; returns 0 when either side has zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// -sum p * ln(p + eps). Natural log; callers that need log2 entropy
/// (radiomics) keep their own convention.
double shannon_entropy(const std::vector<double>& p, double eps = 1e-10);

double mean_of(const std::vector<double>& v);
double population_variance(const std::vector<double>& v);

}  // namespace amoe
