#pragma once

#include <vector>

#include "amoe/volume.hpp"

namespace amoe {

/// Pooled HU descriptor of a masked region: mean, population variance, a
/// 16-bin histogram of fractions over [-1024, 400] HU (out-of-range values
/// land in the end bins), and the occupied voxel fraction. 19 values.
/// An empty region yields the all-zero descriptor.
inline constexpr std::size_t kDescriptorDim = 19;
inline constexpr double kDescriptorHistLo = -1024.0;
inline constexpr double kDescriptorHistHi = 400.0;
inline constexpr std::size_t kDescriptorHistBins = 16;

std::vector<double> region_descriptor(const Volume3D& volume, const RegionMask& mask,
                                      RegionId region);

/// Descriptor over every labeled voxel (the whole lung); used by the global
/// baseline and the MoE backbone.
std::vector<double> lung_descriptor(const Volume3D& volume, const RegionMask& mask);

}  // namespace amoe
