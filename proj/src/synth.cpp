#include "amoe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "amoe/common.hpp"
#include "amoe/csv.hpp"
#include "amoe/rng.hpp"
#include "amoe/volume_io.hpp"

namespace amoe {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (n_patients < 1) throw UsageError("synth: n_patients must be >= 1");
  if (scans_min < 1 || scans_min > scans_max) throw UsageError("synth: bad scans range");
  if (dims.depth < 8 || dims.height < 8 || dims.width < 8) {
    throw UsageError("synth: dims must each be >= 8");
  }
  if (!(disease_prevalence > 0 && disease_prevalence < 1)) {
    throw UsageError("synth: prevalence must be in (0,1)");
  }
  if (basal_bias < 0 || basal_bias > 1) throw UsageError("synth: basal_bias in [0,1]");
  if (noise_sigma < 0) throw UsageError("synth: noise_sigma must be >= 0");
}

namespace {

struct Ellipsoid {
  double cz, cy, cx;
  double rz, ry, rx;
  bool contains(double z, double y, double x) const {
    const double a = (z - cz) / rz, b = (y - cy) / ry, c = (x - cx) / rx;
    return a * a + b * b + c * c <= 1.0;
  }
};

struct PatientGeometry {
  Ellipsoid left, right;
  double left_split;                  // z plane separating LUL / LLL
  double right_split_a, right_split_b;  // z planes separating RUL / RML / RLL
};

PatientGeometry patient_geometry(const SynthConfig& cfg, RandomStream& rng) {
  const double d = static_cast<double>(cfg.dims.depth);
  const double h = static_cast<double>(cfg.dims.height);
  const double w = static_cast<double>(cfg.dims.width);

  const double scale = rng.uniform(0.9, 1.05);
  PatientGeometry g;
  g.left = Ellipsoid{d * 0.5, h * 0.5, w * 0.30, d * 0.42 * scale, h * 0.30 * scale,
                     w * 0.17 * scale};
  g.right = Ellipsoid{d * 0.5, h * 0.5, w * 0.70, d * 0.42 * scale, h * 0.30 * scale,
                      w * 0.17 * scale};
  // Upper lobes sit at low z. Left split 55/45, right splits 40/25/35.
  g.left_split = g.left.cz - g.left.rz + 0.55 * 2.0 * g.left.rz;
  g.right_split_a = g.right.cz - g.right.rz + 0.40 * 2.0 * g.right.rz;
  g.right_split_b = g.right.cz - g.right.rz + 0.65 * 2.0 * g.right.rz;
  return g;
}

RegionMask make_mask(const SynthConfig& cfg, const PatientGeometry& g) {
  RegionMask m;
  m.dims = cfg.dims;
  m.labels.assign(cfg.dims.voxel_count(), 0);
  for (std::size_t z = 0; z < cfg.dims.depth; ++z) {
    for (std::size_t y = 0; y < cfg.dims.height; ++y) {
      for (std::size_t x = 0; x < cfg.dims.width; ++x) {
        const double zz = static_cast<double>(z), yy = static_cast<double>(y),
                     xx = static_cast<double>(x);
        std::uint8_t label = 0;
        if (g.left.contains(zz, yy, xx)) {
          label = zz < g.left_split ? 1 : 2;  // LUL / LLL
        } else if (g.right.contains(zz, yy, xx)) {
          if (zz < g.right_split_a) {
            label = 3;  // RUL
          } else if (zz < g.right_split_b) {
            label = 4;  // RML
          } else {
            label = 5;  // RLL
          }
        }
        m.labels[m.flat(z, y, x)] = label;
      }
    }
  }
  return m;
}

std::array<double, kNumLobes> lobe_disease_probs(double basal_bias) {
  std::array<double, kNumLobes> p{};
  for (int l = 0; l < kNumLobes; ++l) {
    const bool basal = (l == static_cast<int>(RegionId::LLL) || l == static_cast<int>(RegionId::RLL));
    p[l] = basal ? 0.5 + 0.5 * basal_bias : 0.5 - 0.5 * basal_bias;
  }
  return p;
}

}  // namespace

GeneratedScan generate_scan(const SynthConfig& cfg, const std::string& patient_id,
                            const std::string& scan_id, bool patient_diseased) {
  RandomStream geo_rng = RandomStream::derived(cfg.seed, "geometry/" + patient_id);
  const PatientGeometry geom = patient_geometry(cfg, geo_rng);

  RandomStream rng = RandomStream::derived(cfg.seed, "scan/" + patient_id + "/" + scan_id);

  GeneratedScan out;
  out.mask = make_mask(cfg, geom);
  out.truth.patient_id = patient_id;
  out.truth.scan_id = scan_id;

  if (patient_diseased) {
    const auto probs = lobe_disease_probs(cfg.basal_bias);
    bool any = false;
    for (int l = 0; l < kNumLobes; ++l) {
      out.truth.diseased[l] = rng.bernoulli(probs[l]);
      any = any || out.truth.diseased[l];
    }
    if (!any) {
      // Force one lobe, drawn from the renormalized lobe distribution.
      double total = 0;
      for (double p : probs) total += p;
      double u = rng.next_double() * total;
      int pick = kNumLobes - 1;
      for (int l = 0; l < kNumLobes; ++l) {
        if (u < probs[l]) {
          pick = l;
          break;
        }
        u -= probs[l];
      }
      out.truth.diseased[pick] = true;
    }
    for (int l = 0; l < kNumLobes; ++l) {
      if (out.truth.diseased[l]) out.truth.intensity[l] = 250.0 * rng.uniform(0.8, 1.2);
    }
  }

  Volume3D& v = out.volume;
  v.dims = cfg.dims;
  v.spacing = cfg.spacing;
  v.voxels.assign(cfg.dims.voxel_count(), 0.0);

  for (std::size_t z = 0; z < cfg.dims.depth; ++z) {
    for (std::size_t y = 0; y < cfg.dims.height; ++y) {
      for (std::size_t x = 0; x < cfg.dims.width; ++x) {
        const std::size_t i = v.flat(z, y, x);
        const std::uint8_t label = out.mask.labels[i];
        double hu;
        if (label == 0) {
          hu = 40.0 + rng.normal(0.0, 10.0);  // soft tissue outside the lungs
        } else {
          hu = rng.normal(-800.0, cfg.noise_sigma);
          const int lobe = label - 1;
          if (out.truth.diseased[lobe]) {
            // Reticular texture: mean shift plus a high-frequency checker.
            const double amp = 0.6 * out.truth.intensity[lobe];
            hu += out.truth.intensity[lobe] + (((z + y + x) % 2 == 0) ? amp : -amp);
          }
        }
        v.voxels[i] = std::clamp(std::round(hu), -1024.0, 3071.0);
      }
    }
  }

  // Every lobe of a training phantom must be nonempty.
  for (int l = 0; l < kNumLobes; ++l) {
    if (region_voxel_count(out.mask, static_cast<RegionId>(l)) == 0) {
      throw InvariantError("synth: degenerate dims, empty lobe " +
                           region_name(static_cast<RegionId>(l)));
    }
  }
  return out;
}

SynthResult generate_cohort(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "volumes", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (!fs::is_directory(out_dir)) throw DataError("synth: unwritable directory " + out_dir);

  SynthResult result;
  CsvTable truth_csv;
  truth_csv.header = {"scan_id", "region", "diseased", "intensity"};

  for (int p = 0; p < config.n_patients; ++p) {
    char pid_buf[16];
    std::snprintf(pid_buf, sizeof(pid_buf), "P%04d", p);
    const std::string patient_id = pid_buf;
    RandomStream prng = RandomStream::derived(config.seed, "patient/" + patient_id);
    const int n_scans =
        config.scans_min + static_cast<int>(prng.index(
                               static_cast<std::size_t>(config.scans_max - config.scans_min + 1)));
    const bool diseased = prng.bernoulli(config.disease_prevalence);

    for (int s = 0; s < n_scans; ++s) {
      const std::string scan_id = patient_id + "_S" + std::to_string(s);
      GeneratedScan scan = generate_scan(config, patient_id, scan_id, diseased);

      const std::string vol_rel = "volumes/" + scan_id + ".vol";
      const std::string mask_rel = "masks/" + scan_id + ".vol";
      write_volume(scan.volume, (fs::path(out_dir) / vol_rel).string());
      write_mask(scan.mask, (fs::path(out_dir) / mask_rel).string());

      ScanRecord rec;
      rec.patient_id = patient_id;
      rec.scan_id = scan_id;
      rec.label = diseased ? 1 : 0;
      rec.volume_path = vol_rel;
      rec.mask_path = mask_rel;
      result.cohort.records.push_back(rec);
      result.truth.scans.push_back(scan.truth);

      for (int l = 0; l < kNumLobes; ++l) {
        truth_csv.rows.push_back({scan_id, region_name(static_cast<RegionId>(l)),
                                  scan.truth.diseased[l] ? "1" : "0",
                                  fmt_double(scan.truth.intensity[l])});
      }
    }
  }

  result.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  write_cohort(result.cohort, result.manifest_path);
  write_csv((fs::path(out_dir) / "truth.csv").string(), truth_csv);

  // Reload so downstream paths resolve against the manifest directory.
  result.cohort = load_cohort(result.manifest_path);
  return result;
}

std::vector<RegionTruthSummary> describe_truth(const PhantomTruth& truth) {
  std::vector<RegionTruthSummary> rows;
  if (truth.scans.empty()) return rows;
  for (int l = 0; l < kNumLobes; ++l) {
    RegionTruthSummary r;
    r.region = static_cast<RegionId>(l);
    r.n_scans = truth.scans.size();
    std::size_t diseased = 0;
    double intensity_sum = 0;
    for (const auto& s : truth.scans) {
      if (s.diseased[l]) {
        ++diseased;
        intensity_sum += s.intensity[l];
      }
    }
    r.disease_frequency =
        static_cast<double>(diseased) / static_cast<double>(truth.scans.size());
    r.mean_intensity = diseased ? intensity_sum / static_cast<double>(diseased) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace amoe
