#include <cmath>

#include "amoe/common.hpp"
#include "amoe/radiomics/features.hpp"

namespace amoe::radiomics {

NamedValues shape_features(const RegionMask& mask, RegionId region, const Spacing& spacing) {
  const std::size_t n = region_voxel_count(mask, region);
  if (n == 0) throw DataError("shape_features: empty region");

  const double face_z = spacing.dy * spacing.dx;  // face perpendicular to z
  const double face_y = spacing.dz * spacing.dx;
  const double face_x = spacing.dz * spacing.dy;

  auto in_region = [&](long long z, long long y, long long x) {
    if (z < 0 || y < 0 || x < 0 || static_cast<std::size_t>(z) >= mask.dims.depth ||
        static_cast<std::size_t>(y) >= mask.dims.height ||
        static_cast<std::size_t>(x) >= mask.dims.width) {
      return false;
    }
    return mask.in_region(mask.flat(static_cast<std::size_t>(z), static_cast<std::size_t>(y),
                                    static_cast<std::size_t>(x)),
                          region);
  };

  double area = 0;
  for (std::size_t z = 0; z < mask.dims.depth; ++z) {
    for (std::size_t y = 0; y < mask.dims.height; ++y) {
      for (std::size_t x = 0; x < mask.dims.width; ++x) {
        if (!mask.in_region(mask.flat(z, y, x), region)) continue;
        const auto zz = static_cast<long long>(z), yy = static_cast<long long>(y),
                   xx = static_cast<long long>(x);
        if (!in_region(zz - 1, yy, xx)) area += face_z;
        if (!in_region(zz + 1, yy, xx)) area += face_z;
        if (!in_region(zz, yy - 1, xx)) area += face_y;
        if (!in_region(zz, yy + 1, xx)) area += face_y;
        if (!in_region(zz, yy, xx - 1)) area += face_x;
        if (!in_region(zz, yy, xx + 1)) area += face_x;
      }
    }
  }

  const double volume = static_cast<double>(n) * spacing.dz * spacing.dy * spacing.dx;
  const double sphericity = std::cbrt(M_PI) * std::pow(6.0 * volume, 2.0 / 3.0) / area;
  const double compactness = volume / (std::sqrt(M_PI) * std::pow(area, 1.5));

  return {
      {"shape_volume_mm3", volume},
      {"shape_surface_area_mm2", area},
      {"shape_sphericity", sphericity},
      {"shape_compactness", compactness},
  };
}

}  // namespace amoe::radiomics
