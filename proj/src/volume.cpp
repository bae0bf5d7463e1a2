#include "amoe/volume.hpp"

#include <cmath>

#include "amoe/common.hpp"

namespace amoe {

namespace {
const std::array<std::string, kNumRegions> kRegionNames = {
    "LUL", "LLL", "RUL", "RML", "RLL", "LeftLung", "RightLung"};

const std::array<std::vector<std::uint8_t>, kNumRegions> kRegionLabelSets = {{
    {1}, {2}, {3}, {4}, {5}, {1, 2}, {3, 4, 5},
}};
}  // namespace

const std::string& region_name(RegionId r) { return kRegionNames[static_cast<int>(r)]; }

RegionId region_from_name(const std::string& name) {
  for (int i = 0; i < kNumRegions; ++i) {
    if (kRegionNames[i] == name) return static_cast<RegionId>(i);
  }
  throw DataError("unknown region: " + name);
}

const std::vector<std::uint8_t>& region_labels(RegionId r) {
  return kRegionLabelSets[static_cast<int>(r)];
}

void Volume3D::validate() const {
  if (dims.depth == 0 || dims.height == 0 || dims.width == 0) {
    throw DataError("volume dims must be positive");
  }
  if (voxels.size() != dims.voxel_count()) {
    throw DataError("voxel count does not match dims");
  }
  if (!(spacing.dz > 0 && spacing.dy > 0 && spacing.dx > 0) ||
      !std::isfinite(spacing.dz) || !std::isfinite(spacing.dy) || !std::isfinite(spacing.dx)) {
    throw DataError("non-positive spacing");
  }
  for (double v : voxels) {
    if (!std::isfinite(v)) throw DataError("non-finite voxel value");
  }
}

void RegionMask::validate() const {
  if (labels.size() != dims.voxel_count()) {
    throw DataError("mask label count does not match dims");
  }
  for (std::uint8_t l : labels) {
    if (l > 5) throw DataError("mask label outside {0..5}");
  }
}

bool RegionMask::in_region(std::size_t flat_idx, RegionId r) const {
  const std::uint8_t l = labels[flat_idx];
  if (l == 0) return false;
  switch (r) {
    case RegionId::LeftLung:
      return l == 1 || l == 2;
    case RegionId::RightLung:
      return l >= 3 && l <= 5;
    default:
      return l == static_cast<std::uint8_t>(static_cast<int>(r) + 1);
  }
}

Volume3D extract_region(const Volume3D& volume, const RegionMask& mask, RegionId region) {
  if (!(volume.dims == mask.dims)) throw DataError("extract_region: dims mismatch");
  Volume3D out = volume;
  const std::size_t n = volume.voxels.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.in_region(i, region)) out.voxels[i] = kMaskFillHu;
  }
  return out;
}

std::size_t region_voxel_count(const RegionMask& mask, RegionId region) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.in_region(i, region)) ++n;
  }
  return n;
}

}  // namespace amoe
