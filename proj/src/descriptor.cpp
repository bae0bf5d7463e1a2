#include "amoe/descriptor.hpp"

#include <algorithm>
#include <cmath>

namespace amoe {

namespace {

std::vector<double> pooled(const Volume3D& volume, const std::vector<char>& member) {
  std::vector<double> out(kDescriptorDim, 0.0);
  std::size_t n = 0;
  double sum = 0;
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) {
    if (!member[i]) continue;
    ++n;
    sum += volume.voxels[i];
  }
  if (n == 0) return out;

  const double mean = sum / static_cast<double>(n);
  double var = 0;
  std::vector<double> hist(kDescriptorHistBins, 0.0);
  const double width = (kDescriptorHistHi - kDescriptorHistLo) / kDescriptorHistBins;
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) {
    if (!member[i]) continue;
    const double v = volume.voxels[i];
    var += (v - mean) * (v - mean);
    const double t = (v - kDescriptorHistLo) / width;
    const auto bin = static_cast<std::size_t>(
        std::clamp(t, 0.0, static_cast<double>(kDescriptorHistBins - 1)));
    hist[bin] += 1.0;
  }
  var /= static_cast<double>(n);

  out[0] = mean;
  out[1] = var;
  for (std::size_t b = 0; b < kDescriptorHistBins; ++b) {
    out[2 + b] = hist[b] / static_cast<double>(n);
  }
  out[18] = static_cast<double>(n) / static_cast<double>(volume.voxels.size());
  return out;
}

}  // namespace

std::vector<double> region_descriptor(const Volume3D& volume, const RegionMask& mask,
                                      RegionId region) {
  std::vector<char> member(volume.voxels.size(), 0);
  for (std::size_t i = 0; i < member.size(); ++i) {
    member[i] = mask.in_region(i, region) ? 1 : 0;
  }
  return pooled(volume, member);
}

std::vector<double> lung_descriptor(const Volume3D& volume, const RegionMask& mask) {
  std::vector<char> member(volume.voxels.size(), 0);
  for (std::size_t i = 0; i < member.size(); ++i) member[i] = mask.labels[i] != 0 ? 1 : 0;
  return pooled(volume, member);
}

}  // namespace amoe
