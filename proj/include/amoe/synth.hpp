#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "amoe/cohort.hpp"
#include "amoe/volume.hpp"

namespace amoe {

/// Configuration for the synthetic cohort generator. Generation is a pure
/// function of this struct: the same config always produces byte-identical
/// files.
struct SynthConfig {
  int n_patients = 80;
  int scans_min = 1;
  int scans_max = 3;
  Dims dims{32, 48, 48};
  Spacing spacing{2.5, 1.5, 1.5};
  double disease_prevalence = 0.5;   // fraction of patients with disease, in (0,1)
  double basal_bias = 0.8;           // 0 = uniform lobes, 1 = lower lobes only
  double noise_sigma = 40.0;         // HU noise on parenchyma
  std::uint64_t seed = 42;

  void validate() const;
};

/// Ground truth for one generated scan: which lobes carry disease texture
/// and the mean HU shift applied there.
struct ScanTruth {
  std::string patient_id;
  std::string scan_id;
  std::array<bool, kNumLobes> diseased{};
  std::array<double, kNumLobes> intensity{};
};

struct PhantomTruth {
  std::vector<ScanTruth> scans;
};

struct SynthResult {
  Cohort cohort;
  PhantomTruth truth;
  std::string manifest_path;
};

/// Generates volumes, masks, manifest.csv and truth.csv under out_dir.
/// Each phantom is a two-ellipsoid lung pair partitioned into five lobes by
/// axial planes (left 55/45, right 40/25/35). Positive scans receive a
/// +~250 HU reticular texture in lobes drawn with basal-biased probabilities
/// (lower lobes 0.5 + 0.5*bias, other lobes 0.5 - 0.5*bias), with at least
/// one diseased lobe forced per positive scan.
SynthResult generate_cohort(const SynthConfig& config, const std::string& out_dir);

/// In-memory generation of a single scan (used by generate_cohort and tests).
struct GeneratedScan {
  Volume3D volume;
  RegionMask mask;
  ScanTruth truth;
};
GeneratedScan generate_scan(const SynthConfig& config, const std::string& patient_id,
                            const std::string& scan_id, bool patient_diseased);

struct RegionTruthSummary {
  RegionId region;
  std::size_t n_scans = 0;
  double disease_frequency = 0;
  double mean_intensity = 0;  // over diseased scans of this region
};

std::vector<RegionTruthSummary> describe_truth(const PhantomTruth& truth);

}  // namespace amoe
