#include <cmath>

#include "amoe/common.hpp"
#include "amoe/radiomics/features.hpp"

namespace amoe::radiomics {

namespace {
double log2_safe(double p) { return p > 0 ? std::log2(p) : 0.0; }
}  // namespace

NamedValues first_order_features(const DiscretizedRegion& d) {
  if (d.size() == 0) throw DataError("first_order_features: empty region");
  const double n = static_cast<double>(d.size());

  double energy = 0, sum = 0, mn = d.raw_hu[0], mx = d.raw_hu[0];
  for (double v : d.raw_hu) {
    energy += v * v;
    sum += v;
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double mean = sum / n;

  // Min-anchored central moments: exact under integer HU shifts.
  double ysum = 0;
  for (double v : d.raw_hu) ysum += v - mn;
  const double ymean = ysum / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : d.raw_hu) {
    const double dy = (v - mn) - ymean;
    const double dy2 = dy * dy;
    m2 += dy2;
    m3 += dy2 * dy;
    m4 += dy2 * dy2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double variance = m2;
  const double skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;  // Fisher: normal -> 0

  // Bin-histogram entropy (bits) and uniformity.
  std::vector<double> hist(static_cast<std::size_t>(d.bin_count), 0.0);
  for (int b : d.bins) hist[static_cast<std::size_t>(b - 1)] += 1.0;
  double entropy = 0, uniformity = 0;
  for (double c : hist) {
    const double p = c / n;
    entropy -= p * log2_safe(p);
    uniformity += p * p;
  }

  return {
      {"firstorder_energy", energy},
      {"firstorder_mean", mean},
      {"firstorder_variance", variance},
      {"firstorder_skewness", skewness},
      {"firstorder_kurtosis", kurtosis},
      {"firstorder_minimum", mn},
      {"firstorder_maximum", mx},
      {"firstorder_range", mx - mn},
      {"firstorder_entropy", entropy},
      {"firstorder_uniformity", uniformity},
  };
}

}  // namespace amoe::radiomics
