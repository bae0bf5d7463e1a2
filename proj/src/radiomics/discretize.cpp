#include "amoe/radiomics/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amoe/common.hpp"

namespace amoe::radiomics {

DiscretizedRegion discretize(const Volume3D& volume, const RegionMask& mask, RegionId region,
                             double bin_width) {
  if (!(volume.dims == mask.dims)) throw DataError("discretize: dims mismatch");
  if (!(bin_width > 0)) throw UsageError("discretize: bin_width must be > 0");

  DiscretizedRegion d;
  d.dims = volume.dims;
  d.spacing = volume.spacing;
  d.bin_width = bin_width;
  d.grid.assign(volume.dims.voxel_count(), 0);

  double min_hu = std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < volume.dims.depth; ++z) {
    for (std::size_t y = 0; y < volume.dims.height; ++y) {
      for (std::size_t x = 0; x < volume.dims.width; ++x) {
        const std::size_t i = volume.flat(z, y, x);
        if (!mask.in_region(i, region)) continue;
        d.coords.push_back(
            {static_cast<int>(z), static_cast<int>(y), static_cast<int>(x)});
        d.raw_hu.push_back(volume.voxels[i]);
        min_hu = std::min(min_hu, volume.voxels[i]);
      }
    }
  }
  if (d.coords.empty()) throw DataError("discretize: empty region " + region_name(region));

  d.min_hu = min_hu;
  d.bins.resize(d.coords.size());
  for (std::size_t k = 0; k < d.coords.size(); ++k) {
    const int bin = static_cast<int>(std::floor((d.raw_hu[k] - min_hu) / bin_width)) + 1;
    d.bins[k] = bin;
    d.bin_count = std::max(d.bin_count, bin);
    const auto& c = d.coords[k];
    d.grid[(static_cast<std::size_t>(c.z) * d.dims.height + static_cast<std::size_t>(c.y)) *
               d.dims.width +
           static_cast<std::size_t>(c.x)] = bin;
  }
  return d;
}

}  // namespace amoe::radiomics
