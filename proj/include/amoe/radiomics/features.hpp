#pragma once

#include <string>
#include <utility>
#include <vector>

#include "amoe/radiomics/discretize.hpp"
#include "amoe/radiomics/schema.hpp"
#include "amoe/volume.hpp"

namespace amoe::radiomics {

using NamedValues = std::vector<std::pair<std::string, double>>;

/// Intensity statistics over the in-region voxels. Central moments are
/// computed on min-anchored values so an integer HU shift leaves
/// variance/skewness/kurtosis bit-identical. Degenerate (constant) regions
/// report skewness = kurtosis = 0. Entropy/uniformity use the discretized
/// bin histogram, entropy in bits.
NamedValues first_order_features(const DiscretizedRegion& d);

/// Voxel-count volume and exposed-face surface area, plus sphericity
///   pi^(1/3) * (6V)^(2/3) / A
/// and compactness V / (sqrt(pi) * A^(3/2)).
NamedValues shape_features(const RegionMask& mask, RegionId region, const Spacing& spacing);

/// Texture matrices. Counts are accumulated over the 13 unique distance-1
/// 3D directions (GLCM, GLRLM) or 26-neighborhoods (GLSZM zones, GLDM
/// dependences, NGTDM differences). Matrices are aggregated across
/// directions before normalization.
struct TextureMatrix {
  enum class Kind { GLCM, GLRLM, GLSZM, GLDM, NGTDM };
  Kind kind;
  std::size_t rows = 0;  // gray levels 1..rows
  std::size_t cols = 0;  // kind-specific second axis (see each builder)
  std::vector<double> counts;      // row-major raw counts; NGTDM: columns (n_i, p_i, s_i)
  std::vector<double> normalized;  // counts / total; empty for NGTDM
  double total = 0;

  double count_at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
  double norm_at(std::size_t r, std::size_t c) const { return normalized[r * cols + c]; }
};

struct TextureResult {
  TextureMatrix matrix;
  NamedValues features;
};

/// Symmetric co-occurrence matrix at distance 1. Throws when the region has
/// no in-region neighbor pair.
TextureResult glcm(const DiscretizedRegion& d);

/// Run lengths per direction: in-region voxels are ordered by their
/// projection onto the direction (ties by raster order) and runs are maximal
/// same-bin stretches of that sequence. A constant region therefore yields
/// exactly one run per direction. Columns: run length 1..N.
TextureResult glrlm(const DiscretizedRegion& d);

/// 26-connected constant-bin zones. Columns: zone size 1..N.
TextureResult glszm(const DiscretizedRegion& d);

/// Dependence = number of 26-neighbors inside the region sharing the
/// center's bin. Column j holds dependence j (0-based); emphasis features
/// weight by (dependence + 1).
TextureResult gldm(const DiscretizedRegion& d);

/// Neighborhood gray-tone difference triples (n_i, p_i, s_i); voxels without
/// in-region neighbors contribute 0 to s_i. Coarseness is capped at 1e6 when
/// sum(p_i * s_i) vanishes.
TextureResult ngtdm(const DiscretizedRegion& d);

/// Full schema-ordered vector for one (volume, mask, region).
FeatureVector extract_features(const Volume3D& volume, const RegionMask& mask, RegionId region,
                               double bin_width = kDefaultBinWidthHu);

/// The 13 unique distance-1 directions of the 3D lattice (positive
/// lexicographic half of the 26-neighborhood).
const std::vector<VoxelCoord>& lattice_directions_13();

/// All 26 neighbor offsets.
const std::vector<VoxelCoord>& lattice_offsets_26();

}  // namespace amoe::radiomics
