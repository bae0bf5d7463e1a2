#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <tuple>

#include "amoe/common.hpp"
#include "amoe/radiomics/features.hpp"

namespace amoe::radiomics {

namespace {

double log2_safe(double p) { return p > 0 ? std::log2(p) : 0.0; }

TextureMatrix make_matrix(TextureMatrix::Kind kind, std::size_t rows, std::size_t cols) {
  TextureMatrix m;
  m.kind = kind;
  m.rows = rows;
  m.cols = cols;
  m.counts.assign(rows * cols, 0.0);
  return m;
}

void normalize_matrix(TextureMatrix& m) {
  m.total = std::accumulate(m.counts.begin(), m.counts.end(), 0.0);
  m.normalized.assign(m.counts.size(), 0.0);
  if (m.total > 0) {
    for (std::size_t i = 0; i < m.counts.size(); ++i) m.normalized[i] = m.counts[i] / m.total;
  }
}

/// Trims all-zero trailing columns (run lengths / zone sizes that never occur).
void trim_cols(TextureMatrix& m) {
  std::size_t used = 0;
  for (std::size_t c = 0; c < m.cols; ++c) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (m.counts[r * m.cols + c] != 0.0) used = std::max(used, c + 1);
    }
  }
  used = std::max<std::size_t>(used, 1);
  if (used == m.cols) return;
  std::vector<double> out(m.rows * used, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < used; ++c) out[r * used + c] = m.counts[r * m.cols + c];
  }
  m.cols = used;
  m.counts = std::move(out);
}

}  // namespace

const std::vector<VoxelCoord>& lattice_directions_13() {
  static const std::vector<VoxelCoord> dirs = [] {
    std::vector<VoxelCoord> d;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dz == 0 && dy == 0 && dx == 0) continue;
          // keep the positive lexicographic half
          if (dz > 0 || (dz == 0 && dy > 0) || (dz == 0 && dy == 0 && dx > 0)) {
            d.push_back({dz, dy, dx});
          }
        }
      }
    }
    return d;
  }();
  return dirs;
}

const std::vector<VoxelCoord>& lattice_offsets_26() {
  static const std::vector<VoxelCoord> offs = [] {
    std::vector<VoxelCoord> d;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dz || dy || dx) d.push_back({dz, dy, dx});
        }
      }
    }
    return d;
  }();
  return offs;
}

TextureResult glcm(const DiscretizedRegion& d) {
  if (d.size() < 2) throw DataError("glcm: need >= 2 in-region voxels");
  const std::size_t ng = static_cast<std::size_t>(d.bin_count);
  TextureMatrix m = make_matrix(TextureMatrix::Kind::GLCM, ng, ng);

  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& c = d.coords[k];
    const int bi = d.bins[k];
    for (const auto& dir : lattice_directions_13()) {
      const int bj = d.bin_at(c.z + dir.z, c.y + dir.y, c.x + dir.x);
      if (bj == 0) continue;
      m.counts[(bi - 1) * m.cols + (bj - 1)] += 1.0;
      m.counts[(bj - 1) * m.cols + (bi - 1)] += 1.0;
    }
  }
  normalize_matrix(m);
  if (m.total == 0) throw DataError("glcm: no valid neighbor pair");

  // Marginal moments (matrix is symmetric, so mu_x = mu_y).
  double mu = 0;
  for (std::size_t i = 0; i < ng; ++i) {
    for (std::size_t j = 0; j < ng; ++j) mu += (static_cast<double>(i) + 1) * m.norm_at(i, j);
  }
  double var = 0;
  for (std::size_t i = 0; i < ng; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      const double di = static_cast<double>(i) + 1 - mu;
      var += di * di * m.norm_at(i, j);
    }
  }

  double contrast = 0, joint_energy = 0, joint_entropy = 0, idm = 0, corr_num = 0;
  for (std::size_t i = 0; i < ng; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      const double p = m.norm_at(i, j);
      const double diff = static_cast<double>(i) - static_cast<double>(j);
      contrast += p * diff * diff;
      joint_energy += p * p;
      joint_entropy -= p * log2_safe(p);
      idm += p / (1.0 + diff * diff);
      corr_num += p * (static_cast<double>(i) + 1 - mu) * (static_cast<double>(j) + 1 - mu);
    }
  }
  const double correlation = var > 0 ? corr_num / var : 1.0;  // constant texture -> 1

  TextureResult r;
  r.matrix = std::move(m);
  r.features = {
      {"glcm_contrast", contrast},
      {"glcm_correlation", correlation},
      {"glcm_joint_energy", joint_energy},
      {"glcm_joint_entropy", joint_entropy},
      {"glcm_inverse_difference_moment", idm},
  };
  return r;
}

TextureResult glrlm(const DiscretizedRegion& d) {
  if (d.size() == 0) throw DataError("glrlm: empty region");
  const std::size_t np = d.size();
  const std::size_t ng = static_cast<std::size_t>(d.bin_count);
  TextureMatrix m = make_matrix(TextureMatrix::Kind::GLRLM, ng, np);

  std::vector<std::size_t> order(np);
  for (const auto& dir : lattice_directions_13()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Order voxels by projection onto the direction, ties by raster coords.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& ca = d.coords[a];
      const auto& cb = d.coords[b];
      const long long ta = static_cast<long long>(ca.z) * dir.z +
                           static_cast<long long>(ca.y) * dir.y +
                           static_cast<long long>(ca.x) * dir.x;
      const long long tb = static_cast<long long>(cb.z) * dir.z +
                           static_cast<long long>(cb.y) * dir.y +
                           static_cast<long long>(cb.x) * dir.x;
      if (ta != tb) return ta < tb;
      return std::tie(ca.z, ca.y, ca.x) < std::tie(cb.z, cb.y, cb.x);
    });

    std::size_t k = 0;
    while (k < np) {
      const int bin = d.bins[order[k]];
      std::size_t len = 1;
      while (k + len < np && d.bins[order[k + len]] == bin) ++len;
      m.counts[(bin - 1) * m.cols + (len - 1)] += 1.0;
      k += len;
    }
  }
  trim_cols(m);
  normalize_matrix(m);

  const double nr = m.total;
  double sre = 0, lre = 0, rln = 0, gln = 0;
  for (std::size_t c = 0; c < m.cols; ++c) {
    double col_sum = 0;
    const double l = static_cast<double>(c) + 1;
    for (std::size_t g = 0; g < m.rows; ++g) {
      const double p = m.norm_at(g, c);
      sre += p / (l * l);
      lre += p * l * l;
      col_sum += m.count_at(g, c);
    }
    rln += col_sum * col_sum;
  }
  for (std::size_t g = 0; g < m.rows; ++g) {
    double row_sum = 0;
    for (std::size_t c = 0; c < m.cols; ++c) row_sum += m.count_at(g, c);
    gln += row_sum * row_sum;
  }
  rln /= nr;
  gln /= nr;
  const double rp = nr / (static_cast<double>(np) * 13.0);

  TextureResult r;
  r.matrix = std::move(m);
  r.features = {
      {"glrlm_short_run_emphasis", sre},
      {"glrlm_long_run_emphasis", lre},
      {"glrlm_run_length_nonuniformity", rln},
      {"glrlm_gray_level_nonuniformity", gln},
      {"glrlm_run_percentage", rp},
  };
  return r;
}

TextureResult glszm(const DiscretizedRegion& d) {
  if (d.size() == 0) throw DataError("glszm: empty region");
  const std::size_t np = d.size();
  const std::size_t ng = static_cast<std::size_t>(d.bin_count);
  TextureMatrix m = make_matrix(TextureMatrix::Kind::GLSZM, ng, np);

  // Flood-fill 26-connected constant-bin zones, seeding in raster order.
  std::vector<char> visited(np, 0);
  // Map flat grid index -> position in coords for visited bookkeeping.
  std::vector<std::int64_t> pos(d.dims.voxel_count(), -1);
  for (std::size_t k = 0; k < np; ++k) {
    const auto& c = d.coords[k];
    pos[(static_cast<std::size_t>(c.z) * d.dims.height + static_cast<std::size_t>(c.y)) *
            d.dims.width +
        static_cast<std::size_t>(c.x)] = static_cast<std::int64_t>(k);
  }

  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < np; ++seed) {
    if (visited[seed]) continue;
    const int bin = d.bins[seed];
    std::size_t zone = 0;
    stack.assign(1, seed);
    visited[seed] = 1;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++zone;
      const auto& c = d.coords[cur];
      for (const auto& off : lattice_offsets_26()) {
        const int nz = c.z + off.z, ny = c.y + off.y, nx = c.x + off.x;
        if (d.bin_at(nz, ny, nx) != bin) continue;
        const auto p = pos[(static_cast<std::size_t>(nz) * d.dims.height +
                            static_cast<std::size_t>(ny)) *
                               d.dims.width +
                           static_cast<std::size_t>(nx)];
        if (p >= 0 && !visited[static_cast<std::size_t>(p)]) {
          visited[static_cast<std::size_t>(p)] = 1;
          stack.push_back(static_cast<std::size_t>(p));
        }
      }
    }
    m.counts[(bin - 1) * m.cols + (zone - 1)] += 1.0;
  }
  trim_cols(m);
  normalize_matrix(m);

  const double nz_total = m.total;
  double sae = 0, lae = 0, szn = 0, gln = 0;
  for (std::size_t c = 0; c < m.cols; ++c) {
    double col_sum = 0;
    const double s = static_cast<double>(c) + 1;
    for (std::size_t g = 0; g < m.rows; ++g) {
      const double p = m.norm_at(g, c);
      sae += p / (s * s);
      lae += p * s * s;
      col_sum += m.count_at(g, c);
    }
    szn += col_sum * col_sum;
  }
  for (std::size_t g = 0; g < m.rows; ++g) {
    double row_sum = 0;
    for (std::size_t c = 0; c < m.cols; ++c) row_sum += m.count_at(g, c);
    gln += row_sum * row_sum;
  }
  szn /= nz_total;
  gln /= nz_total;
  const double zp = nz_total / static_cast<double>(np);

  TextureResult r;
  r.matrix = std::move(m);
  r.features = {
      {"glszm_small_area_emphasis", sae},
      {"glszm_large_area_emphasis", lae},
      {"glszm_size_zone_nonuniformity", szn},
      {"glszm_gray_level_nonuniformity", gln},
      {"glszm_zone_percentage", zp},
  };
  return r;
}

TextureResult gldm(const DiscretizedRegion& d) {
  if (d.size() == 0) throw DataError("gldm: empty region");
  const std::size_t np = d.size();
  const std::size_t ng = static_cast<std::size_t>(d.bin_count);
  TextureMatrix m = make_matrix(TextureMatrix::Kind::GLDM, ng, 27);  // dependence 0..26

  for (std::size_t k = 0; k < np; ++k) {
    const auto& c = d.coords[k];
    const int bin = d.bins[k];
    int dep = 0;
    for (const auto& off : lattice_offsets_26()) {
      if (d.bin_at(c.z + off.z, c.y + off.y, c.x + off.x) == bin) ++dep;
    }
    m.counts[(bin - 1) * m.cols + static_cast<std::size_t>(dep)] += 1.0;
  }
  trim_cols(m);
  normalize_matrix(m);

  double sde = 0, lde = 0, dn = 0, gln = 0, dent = 0;
  for (std::size_t c = 0; c < m.cols; ++c) {
    double col_sum = 0;
    const double w = static_cast<double>(c) + 1;  // dependence + 1
    for (std::size_t g = 0; g < m.rows; ++g) {
      const double p = m.norm_at(g, c);
      sde += p / (w * w);
      lde += p * w * w;
      dent -= p * log2_safe(p);
      col_sum += m.count_at(g, c);
    }
    dn += col_sum * col_sum;
  }
  for (std::size_t g = 0; g < m.rows; ++g) {
    double row_sum = 0;
    for (std::size_t c = 0; c < m.cols; ++c) row_sum += m.count_at(g, c);
    gln += row_sum * row_sum;
  }
  dn /= m.total;
  gln /= m.total;

  TextureResult r;
  r.matrix = std::move(m);
  r.features = {
      {"gldm_small_dependence_emphasis", sde},
      {"gldm_large_dependence_emphasis", lde},
      {"gldm_dependence_nonuniformity", dn},
      {"gldm_gray_level_nonuniformity", gln},
      {"gldm_dependence_entropy", dent},
  };
  return r;
}

TextureResult ngtdm(const DiscretizedRegion& d) {
  if (d.size() == 0) throw DataError("ngtdm: empty region");
  const std::size_t np = d.size();
  const std::size_t ng = static_cast<std::size_t>(d.bin_count);

  std::vector<double> n_i(ng, 0.0), s_i(ng, 0.0);
  for (std::size_t k = 0; k < np; ++k) {
    const auto& c = d.coords[k];
    const int bin = d.bins[k];
    n_i[static_cast<std::size_t>(bin - 1)] += 1.0;
    double nb_sum = 0;
    int nb_count = 0;
    for (const auto& off : lattice_offsets_26()) {
      const int b = d.bin_at(c.z + off.z, c.y + off.y, c.x + off.x);
      if (b > 0) {
        nb_sum += static_cast<double>(b);
        ++nb_count;
      }
    }
    if (nb_count > 0) {
      s_i[static_cast<std::size_t>(bin - 1)] +=
          std::fabs(static_cast<double>(bin) - nb_sum / static_cast<double>(nb_count));
    }
  }

  TextureMatrix m = make_matrix(TextureMatrix::Kind::NGTDM, ng, 3);
  const double n_total = static_cast<double>(np);
  for (std::size_t g = 0; g < ng; ++g) {
    m.counts[g * 3 + 0] = n_i[g];
    m.counts[g * 3 + 1] = n_i[g] / n_total;
    m.counts[g * 3 + 2] = s_i[g];
  }
  m.total = n_total;

  std::vector<std::size_t> occupied;
  for (std::size_t g = 0; g < ng; ++g) {
    if (n_i[g] > 0) occupied.push_back(g);
  }
  const double ngp = static_cast<double>(occupied.size());
  auto p_of = [&](std::size_t g) { return n_i[g] / n_total; };
  auto level = [](std::size_t g) { return static_cast<double>(g) + 1; };

  double ps_sum = 0, s_sum = 0;
  for (std::size_t g : occupied) {
    ps_sum += p_of(g) * s_i[g];
    s_sum += s_i[g];
  }

  constexpr double kCoarsenessCap = 1e6;
  const double coarseness = ps_sum > 0 ? std::min(1.0 / ps_sum, kCoarsenessCap) : kCoarsenessCap;

  double busy_den = 0, contrast_pairs = 0, complexity = 0, strength_num = 0;
  for (std::size_t gi : occupied) {
    for (std::size_t gj : occupied) {
      if (gi == gj) continue;
      busy_den += std::fabs(level(gi) * p_of(gi) - level(gj) * p_of(gj));
      const double diff = level(gi) - level(gj);
      contrast_pairs += p_of(gi) * p_of(gj) * diff * diff;
      complexity += std::fabs(diff) * (p_of(gi) * s_i[gi] + p_of(gj) * s_i[gj]) /
                    (p_of(gi) + p_of(gj));
      strength_num += (p_of(gi) + p_of(gj)) * diff * diff;
    }
  }
  const double busyness = (occupied.size() > 1 && busy_den > 0) ? ps_sum / busy_den : 0.0;
  const double contrast =
      occupied.size() > 1
          ? (contrast_pairs / (ngp * (ngp - 1.0))) * (s_sum / n_total)
          : 0.0;
  complexity /= n_total;
  const double strength = s_sum > 0 ? strength_num / s_sum : 0.0;

  TextureResult r;
  r.matrix = std::move(m);
  r.features = {
      {"ngtdm_coarseness", coarseness},
      {"ngtdm_busyness", busyness},
      {"ngtdm_contrast", contrast},
      {"ngtdm_complexity", complexity},
      {"ngtdm_strength", strength},
  };
  return r;
}

}  // namespace amoe::radiomics
