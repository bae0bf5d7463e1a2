#pragma once

// Test-only reference implementations, deliberately written with different
// algorithms/data structures than the library so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "amoe/nn/tensor.hpp"
#include "amoe/volume.hpp"

namespace oracle {

using Coord = std::tuple<int, int, int>;  // (z, y, x)

/// Map-based region representation for brute-force texture matrices.
struct Region {
  std::map<Coord, int> bins;  // coordinate -> gray level (1..Ng)
  int max_bin = 0;

  void insert(int z, int y, int x, int bin) {
    bins[{z, y, x}] = bin;
    max_bin = std::max(max_bin, bin);
  }
  int bin_at(int z, int y, int x) const {
    auto it = bins.find({z, y, x});
    return it == bins.end() ? 0 : it->second;
  }
};

/// Independent scalar-loop discretization (same convention: region-min
/// origin, bin = floor((hu-min)/width)+1).
inline Region discretize_region(const amoe::Volume3D& vol, const amoe::RegionMask& mask,
                                amoe::RegionId region, double bin_width) {
  double min_hu = 1e300;
  for (std::size_t z = 0; z < vol.dims.depth; ++z)
    for (std::size_t y = 0; y < vol.dims.height; ++y)
      for (std::size_t x = 0; x < vol.dims.width; ++x)
        if (mask.in_region(vol.flat(z, y, x), region)) min_hu = std::min(min_hu, vol.at(z, y, x));
  Region r;
  for (std::size_t z = 0; z < vol.dims.depth; ++z)
    for (std::size_t y = 0; y < vol.dims.height; ++y)
      for (std::size_t x = 0; x < vol.dims.width; ++x)
        if (mask.in_region(vol.flat(z, y, x), region)) {
          int bin = static_cast<int>(std::floor((vol.at(z, y, x) - min_hu) / bin_width)) + 1;
          r.insert(static_cast<int>(z), static_cast<int>(y), static_cast<int>(x), bin);
        }
  return r;
}

inline std::vector<Coord> offsets26() {
  std::vector<Coord> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dz || dy || dx) out.push_back({dz, dy, dx});
  return out;
}

inline std::vector<Coord> directions13() {
  std::vector<Coord> out;
  for (auto [dz, dy, dx] : offsets26()) {
    if (dz > 0 || (dz == 0 && dy > 0) || (dz == 0 && dy == 0 && dx > 0)) {
      out.push_back({dz, dy, dx});
    }
  }
  return out;
}

/// GLCM by ordered pair enumeration over all 26 offsets (equivalent to the
/// symmetric 13-direction accumulation).
inline std::map<std::pair<int, int>, double> glcm_counts(const Region& r) {
  std::map<std::pair<int, int>, double> counts;
  for (const auto& [c, bin] : r.bins) {
    auto [z, y, x] = c;
    for (auto [dz, dy, dx] : offsets26()) {
      const int nb = r.bin_at(z + dz, y + dy, x + dx);
      if (nb > 0) counts[{bin, nb}] += 1.0;
    }
  }
  return counts;
}

/// GLRLM: per direction, voxels ordered by projection (ties by raster coords)
/// using stable_sort on precomputed keys; runs are maximal same-bin stretches.
inline std::map<std::pair<int, int>, double> glrlm_counts(const Region& r) {
  std::map<std::pair<int, int>, double> counts;  // (gray, length) -> runs
  std::vector<std::pair<Coord, int>> voxels(r.bins.begin(), r.bins.end());
  for (auto [dz, dy, dx] : directions13()) {
    std::vector<std::pair<long long, std::size_t>> keyed;
    for (std::size_t i = 0; i < voxels.size(); ++i) {
      auto [z, y, x] = voxels[i].first;
      keyed.push_back({static_cast<long long>(z) * dz + static_cast<long long>(y) * dy +
                           static_cast<long long>(x) * dx,
                       i});
    }
    std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return voxels[a.second].first < voxels[b.second].first;  // raster tie-break
    });
    std::size_t i = 0;
    while (i < keyed.size()) {
      const int bin = voxels[keyed[i].second].second;
      std::size_t len = 1;
      while (i + len < keyed.size() && voxels[keyed[i + len].second].second == bin) ++len;
      counts[{bin, static_cast<int>(len)}] += 1.0;
      i += len;
    }
  }
  return counts;
}

/// GLSZM zones via union-find over 26-connected same-bin pairs.
inline std::map<std::pair<int, int>, double> glszm_counts(const Region& r) {
  std::vector<std::pair<Coord, int>> voxels(r.bins.begin(), r.bins.end());
  std::map<Coord, std::size_t> idx;
  for (std::size_t i = 0; i < voxels.size(); ++i) idx[voxels[i].first] = i;

  std::vector<std::size_t> parent(voxels.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    auto [z, y, x] = voxels[i].first;
    for (auto [dz, dy, dx] : offsets26()) {
      auto it = idx.find({z + dz, y + dy, x + dx});
      if (it != idx.end() && voxels[it->second].second == voxels[i].second) {
        parent[find(i)] = find(it->second);
      }
    }
  }
  std::map<std::size_t, std::size_t> size_of;
  for (std::size_t i = 0; i < voxels.size(); ++i) ++size_of[find(i)];
  std::map<std::pair<int, int>, double> counts;  // (gray, zone size) -> zones
  for (const auto& [root, size] : size_of) {
    counts[{voxels[root].second, static_cast<int>(size)}] += 1.0;
  }
  return counts;
}

/// GLDM: (gray, dependence) counts, dependence = same-bin 26-neighbors.
inline std::map<std::pair<int, int>, double> gldm_counts(const Region& r) {
  std::map<std::pair<int, int>, double> counts;
  for (const auto& [c, bin] : r.bins) {
    auto [z, y, x] = c;
    int dep = 0;
    for (auto [dz, dy, dx] : offsets26()) {
      if (r.bin_at(z + dz, y + dy, x + dx) == bin) ++dep;
    }
    counts[{bin, dep}] += 1.0;
  }
  return counts;
}

struct NgtdmRow {
  double n = 0, s = 0;
};

inline std::map<int, NgtdmRow> ngtdm_rows(const Region& r) {
  std::map<int, NgtdmRow> rows;
  for (const auto& [c, bin] : r.bins) {
    auto [z, y, x] = c;
    double sum = 0;
    int cnt = 0;
    for (auto [dz, dy, dx] : offsets26()) {
      const int nb = r.bin_at(z + dz, y + dy, x + dx);
      if (nb > 0) {
        sum += nb;
        ++cnt;
      }
    }
    rows[bin].n += 1.0;
    if (cnt > 0) rows[bin].s += std::fabs(bin - sum / cnt);
  }
  return rows;
}

/// Euclidean projection onto the probability simplex by exhaustive support
/// search with KKT feasibility (independent of the sort-based algorithm).
inline std::vector<double> project_simplex_exhaustive(const std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> best;
  double best_dist = 1e300;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    double sum = 0;
    int k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sum += z[i];
        ++k;
      }
    }
    const double tau = (sum - 1.0) / k;
    std::vector<double> w(n, 0.0);
    bool feasible = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        w[i] = z[i] - tau;
        if (w[i] < -1e-12) feasible = false;
      } else if (z[i] - tau > 1e-12) {
        feasible = false;  // KKT: excluded coordinates must not want in
      }
    }
    if (!feasible) continue;
    double dist = 0;
    for (std::size_t i = 0; i < n; ++i) dist += (w[i] - z[i]) * (w[i] - z[i]);
    if (dist < best_dist) {
      best_dist = dist;
      best = w;
    }
  }
  return best;
}

/// Pairwise-concordance AUC.
inline double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) {
        num += 1;
      } else if (scores[i] == scores[j]) {
        num += 0.5;
      }
    }
  }
  return num / pairs;
}

/// Two-pass central moments (mean, population variance, Fisher skew/kurtosis).
struct Moments {
  double mean = 0, variance = 0, skewness = 0, kurtosis = 0;
};
inline Moments moments_twopass(const std::vector<double>& v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.variance = m2;
  m.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  m.kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return m;
}

/// Central finite differences over every scalar of every parameter.
/// loss_eval runs a fresh forward pass; compute_grads fills p->grad.
inline double fd_max_rel_err(std::vector<amoe::nn::Parameter*> params,
                             const std::function<double()>& loss_eval,
                             const std::function<void()>& compute_grads, double step = 1e-5) {
  compute_grads();
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad.data);

  double worst = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + step;
      const double up = loss_eval();
      p->value.data[i] = keep - step;
      const double dn = loss_eval();
      p->value.data[i] = keep;
      const double numeric = (up - dn) / (2 * step);
      const double g = analytic[pi][i];
      const double rel = std::fabs(g - numeric) / std::max({1.0, std::fabs(g), std::fabs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

/// Student-t tail probability by Simpson quadrature of the density.
inline double t_two_sided_p_quadrature(double t_abs, double df) {
  const double norm = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) /
                      std::sqrt(df * M_PI);
  auto pdf = [&](double x) {
    return norm * std::pow(1.0 + x * x / df, -(df + 1) / 2.0);
  };
  // integrate 0..t_abs, central mass = 2 * integral
  const int n = 200000;  // even
  const double h = t_abs / n;
  double s = pdf(0) + pdf(t_abs);
  for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 ? 4.0 : 2.0);
  const double central = 2.0 * (s * h / 3.0);
  return 1.0 - central;
}

}  // namespace oracle
