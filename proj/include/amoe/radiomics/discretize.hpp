#pragma once

#include <cstdint>
#include <vector>

#include "amoe/volume.hpp"

namespace amoe::radiomics {

inline constexpr double kDefaultBinWidthHu = 25.0;

struct VoxelCoord {
  int z = 0, y = 0, x = 0;
};

/// In-region voxels with fixed-bin-width gray levels. The discretization
/// origin is the region's own minimum HU:
///   bin = floor((hu - min_hu) / bin_width) + 1, bins in 1..bin_count.
struct DiscretizedRegion {
  std::vector<VoxelCoord> coords;  // raster (z, y, x) order
  std::vector<int> bins;           // parallel to coords
  std::vector<double> raw_hu;      // parallel to coords
  int bin_count = 0;
  double bin_width = kDefaultBinWidthHu;
  double min_hu = 0;
  Dims dims;
  Spacing spacing;
  std::vector<std::int32_t> grid;  // per flat voxel: bin, or 0 outside the region

  std::size_t size() const { return coords.size(); }
  int bin_at(int z, int y, int x) const {
    if (z < 0 || y < 0 || x < 0 || static_cast<std::size_t>(z) >= dims.depth ||
        static_cast<std::size_t>(y) >= dims.height || static_cast<std::size_t>(x) >= dims.width) {
      return 0;
    }
    return grid[(static_cast<std::size_t>(z) * dims.height + static_cast<std::size_t>(y)) *
                    dims.width +
                static_cast<std::size_t>(x)];
  }
};

DiscretizedRegion discretize(const Volume3D& volume, const RegionMask& mask, RegionId region,
                             double bin_width = kDefaultBinWidthHu);

}  // namespace amoe::radiomics
