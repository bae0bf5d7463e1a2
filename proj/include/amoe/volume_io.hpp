#pragma once

#include <string>

#include "amoe/volume.hpp"

namespace amoe {

// ".vol" container: one UTF-8 header line
//   VOL1 depth height width dz dy dx dtype\n     (dtype in {i16, u8})
// followed by raw little-endian voxels, x fastest, then y, then z.
// Volumes are stored as i16 (HU fits comfortably), masks as u8.

Volume3D load_volume(const std::string& path);
void write_volume(const Volume3D& v, const std::string& path);

RegionMask load_mask(const std::string& path);
void write_mask(const RegionMask& m, const std::string& path);

}  // namespace amoe
