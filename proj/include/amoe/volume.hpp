#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace amoe {

/// The seven anatomical regions: five lobes plus the two lung unions.
/// Mask label values 1..5 map to the five lobes in this order; the combined
/// regions are derived from lobe labels and never stored in masks.
enum class RegionId : int {
  LUL = 0,  // left upper lobe, label 1
  LLL = 1,  // left lower lobe, label 2
  RUL = 2,  // right upper lobe, label 3
  RML = 3,  // right middle lobe, label 4
  RLL = 4,  // right lower lobe, label 5
  LeftLung = 5,
  RightLung = 6,
};

inline constexpr int kNumRegions = 7;
inline constexpr int kNumLobes = 5;
inline constexpr std::array<RegionId, kNumRegions> kAllRegions = {
    RegionId::LUL, RegionId::LLL, RegionId::RUL,      RegionId::RML,
    RegionId::RLL, RegionId::LeftLung, RegionId::RightLung};

const std::string& region_name(RegionId r);
RegionId region_from_name(const std::string& name);

/// Mask labels belonging to a region (lobes: one label; lungs: their lobes).
const std::vector<std::uint8_t>& region_labels(RegionId r);

/// Fill value for voxels outside the selected region: air on the HU scale,
/// so masked inputs stay physically plausible.
inline constexpr double kMaskFillHu = -1024.0;

struct Dims {
  std::size_t depth = 0, height = 0, width = 0;
  std::size_t voxel_count() const { return depth * height * width; }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double dz = 1.0, dy = 1.0, dx = 1.0;
  bool operator==(const Spacing&) const = default;
};

/// Dense voxel grid in Hounsfield units, row-major with x fastest.
/// Immutable by convention once constructed.
struct Volume3D {
  Dims dims;
  Spacing spacing;
  std::vector<double> voxels;

  std::size_t flat(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * dims.height + y) * dims.width + x;
  }
  double at(std::size_t z, std::size_t y, std::size_t x) const { return voxels[flat(z, y, x)]; }
  double& at(std::size_t z, std::size_t y, std::size_t x) { return voxels[flat(z, y, x)]; }

  void validate() const;
};

/// Region label grid paired with a Volume3D. Labels: 0 background, 1..5 lobes.
struct RegionMask {
  Dims dims;
  std::vector<std::uint8_t> labels;

  std::size_t flat(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * dims.height + y) * dims.width + x;
  }
  std::uint8_t at(std::size_t z, std::size_t y, std::size_t x) const { return labels[flat(z, y, x)]; }

  void validate() const;

  /// Per-voxel membership test for a region.
  bool in_region(std::size_t flat_idx, RegionId r) const;
};

/// Copies `volume` keeping voxels whose mask label belongs to `region` and
/// replacing the rest with kMaskFillHu. Dims must match.
Volume3D extract_region(const Volume3D& volume, const RegionMask& mask, RegionId region);

std::size_t region_voxel_count(const RegionMask& mask, RegionId region);

}  // namespace amoe
