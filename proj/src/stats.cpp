#include "amoe/stats.hpp"

#include <algorithm>
#include <cmath>

#include "amoe/common.hpp"

namespace amoe {

std::vector<double> Histogram::probabilities() const {
  std::vector<double> p(counts.size(), 0.0);
  if (total == 0) return p;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return p;
}

Histogram histogram(const std::vector<double>& values, std::size_t n_bins,
                    std::optional<std::pair<double, double>> range) {
  if (n_bins == 0) throw UsageError("histogram: n_bins must be >= 1");
  if (values.empty()) throw DataError("histogram: empty values");

  double lo, hi;
  if (range) {
    lo = range->first;
    hi = range->second;
    if (!(lo <= hi)) throw UsageError("histogram: invalid range");
  } else {
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }

  Histogram h;
  h.counts.assign(n_bins, 0);
  h.edges.resize(n_bins + 1);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i <= n_bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges[n_bins] = hi;

  for (double v : values) {
    std::size_t idx = 0;
    if (hi > lo) {
      double t = (v - lo) / width;
      if (t < 0) t = 0;
      idx = std::min(static_cast<std::size_t>(t), n_bins - 1);
    }
    ++h.counts[idx];
    ++h.total;
  }
  return h;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw UsageError("pearson: length mismatch");
  if (x.size() < 2) throw UsageError("pearson: need >= 2 samples");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // documented zero-variance fallback
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double shannon_entropy(const std::vector<double>& p, double eps) {
  double h = 0;
  for (double pi : p) {
    h -= pi * std::log(pi + eps);
  }
  return h;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace amoe
