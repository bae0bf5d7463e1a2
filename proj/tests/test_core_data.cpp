#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "amoe/cohort.hpp"
#include "amoe/common.hpp"
#include "amoe/rng.hpp"
#include "amoe/volume.hpp"
#include "amoe/volume_io.hpp"
#include "doctest.h"

using namespace amoe;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("amoe_test_" + tag);
  fs::create_directories(p);
  return p;
}

Volume3D make_volume(Dims dims, double fill = 0.0) {
  Volume3D v;
  v.dims = dims;
  v.spacing = {1.0, 1.0, 1.0};
  v.voxels.assign(dims.voxel_count(), fill);
  return v;
}

RegionMask make_mask(Dims dims, std::uint8_t label) {
  RegionMask m;
  m.dims = dims;
  m.labels.assign(dims.voxel_count(), label);
  return m;
}

}  // namespace

TEST_CASE("volume io: zero volume round-trip") {
  const auto dir = temp_dir("vol");
  Volume3D v = make_volume({2, 2, 2});
  const auto path = (dir / "zero.vol").string();
  write_volume(v, path);
  Volume3D r = load_volume(path);
  CHECK(r.dims == v.dims);
  for (double x : r.voxels) CHECK(x == 0.0);
}

TEST_CASE("volume io: random volumes round-trip bit-exact") {
  const auto dir = temp_dir("vol");
  RandomStream rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    Dims dims{1 + rng.index(5), 1 + rng.index(5), 1 + rng.index(5)};
    Volume3D v = make_volume(dims);
    v.spacing = {rng.uniform(0.5, 3), rng.uniform(0.5, 3), rng.uniform(0.5, 3)};
    for (double& x : v.voxels) {
      x = std::floor(rng.uniform(-1024, 3071));  // integer HU, storage is i16
    }
    const auto path = (dir / "rt.vol").string();
    write_volume(v, path);
    Volume3D r = load_volume(path);
    REQUIRE(r.dims == v.dims);
    CHECK(r.spacing.dz == v.spacing.dz);
    CHECK(r.spacing.dy == v.spacing.dy);
    CHECK(r.spacing.dx == v.spacing.dx);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) REQUIRE(r.voxels[i] == v.voxels[i]);
  }
}

TEST_CASE("volume io: truncated payload and malformed header are rejected") {
  const auto dir = temp_dir("vol");
  const auto path = (dir / "bad.vol").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "VOL1 2 2 2 1 1 1 i16\n";
    out << "xx";  // 2 bytes instead of 16
  }
  CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("truncated payload"), DataError);

  {
    std::ofstream out(path, std::ios::binary);
    out << "VOLX 2 2 2 1 1 1 i16\n";
  }
  CHECK_THROWS_AS(load_volume(path), DataError);

  {
    std::ofstream out(path, std::ios::binary);
    out << "VOL1 2 2 2 0 1 1 i16\n";
  }
  CHECK_THROWS_AS(load_volume(path), DataError);
}

TEST_CASE("extract_region: identity and empty-intersection masks") {
  Dims dims{2, 2, 2};
  Volume3D v = make_volume(dims, 100.0);
  RegionMask m = make_mask(dims, 1);

  Volume3D same = extract_region(v, m, RegionId::LUL);
  for (double x : same.voxels) CHECK(x == 100.0);

  Volume3D filled = extract_region(v, m, RegionId::RLL);
  for (double x : filled.voxels) CHECK(x == kMaskFillHu);
}

TEST_CASE("extract_region: mixed-label mask matches per-voxel loop oracle") {
  Dims dims{3, 3, 3};
  RandomStream rng(17);
  Volume3D v = make_volume(dims);
  for (double& x : v.voxels) x = std::floor(rng.uniform(-1000, 500));
  RegionMask m;
  m.dims = dims;
  m.labels.resize(dims.voxel_count());
  for (auto& l : m.labels) l = static_cast<std::uint8_t>(rng.index(6));

  Volume3D out = extract_region(v, m, RegionId::LeftLung);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    const bool keep = m.labels[i] == 1 || m.labels[i] == 2;
    CHECK(out.voxels[i] == (keep ? v.voxels[i] : kMaskFillHu));
  }

  // Idempotence.
  Volume3D again = extract_region(out, m, RegionId::LeftLung);
  CHECK(again.voxels == out.voxels);

  Volume3D other = make_volume({2, 2, 2});
  CHECK_THROWS_AS(extract_region(other, m, RegionId::LUL), DataError);
}

TEST_CASE("region_voxel_count: lobe arithmetic") {
  Dims dims{3, 3, 3};
  CHECK(region_voxel_count(make_mask(dims, 0), RegionId::LUL) == 0);
  CHECK(region_voxel_count(make_mask(dims, 2), RegionId::LLL) == 27);
  CHECK(region_voxel_count(make_mask(dims, 2), RegionId::LeftLung) == 27);

  // Lobe counts partition the labeled voxels; lung counts are lobe sums.
  RandomStream rng(23);
  RegionMask m;
  m.dims = dims;
  m.labels.resize(dims.voxel_count());
  for (auto& l : m.labels) l = static_cast<std::uint8_t>(rng.index(6));
  std::size_t nonzero = 0;
  for (auto l : m.labels) nonzero += l != 0 ? 1 : 0;
  std::size_t lobe_sum = 0;
  for (int r = 0; r < kNumLobes; ++r) lobe_sum += region_voxel_count(m, static_cast<RegionId>(r));
  CHECK(lobe_sum == nonzero);
  CHECK(region_voxel_count(m, RegionId::LeftLung) ==
        region_voxel_count(m, RegionId::LUL) + region_voxel_count(m, RegionId::LLL));
  CHECK(region_voxel_count(m, RegionId::RightLung) ==
        region_voxel_count(m, RegionId::RUL) + region_voxel_count(m, RegionId::RML) +
            region_voxel_count(m, RegionId::RLL));
}

TEST_CASE("cohort manifest: load, dedupe, and validation") {
  const auto dir = temp_dir("cohort");
  const auto path = (dir / "manifest.csv").string();

  {
    std::ofstream out(path);
    out << "patient_id,scan_id,label,volume_path,mask_path\n";
  }
  CHECK_THROWS_WITH_AS(load_cohort(path), doctest::Contains("empty cohort"), DataError);

  {
    std::ofstream out(path);
    out << "patient_id,scan_id,label,volume_path,mask_path\n";
    out << "p1,s1,0,v1.vol,m1.vol\n";
    out << "p1,s2,0,v2.vol,m2.vol\n";
    out << "p2,s1,1,v3.vol,m3.vol\n";
  }
  Cohort c = load_cohort(path);
  CHECK(c.records.size() == 3);
  CHECK(c.patient_index.at("p1").size() == 2);
  CHECK(c.patient_index.at("p2").size() == 1);
  // relative paths resolve against the manifest directory
  CHECK(c.records[0].volume_path == (dir / "v1.vol").string());

  {
    std::ofstream out(path);
    out << "patient_id,scan_id,label,volume_path,mask_path\n";
    out << "p1,s1,0,v1.vol,m1.vol\n";
    out << "p1,s1,1,v2.vol,m2.vol\n";
  }
  CHECK_THROWS_WITH_AS(load_cohort(path), doctest::Contains("duplicate scan"), DataError);

  {
    std::ofstream out(path);
    out << "patient_id,scan_id,label,volume_path,mask_path\n";
    out << "p1,s1,2,v1.vol,m1.vol\n";
  }
  CHECK_THROWS_AS(load_cohort(path), DataError);

  {
    std::ofstream out(path);
    out << "patient_id,scan_id,volume_path,mask_path\n";
    out << "p1,s1,v1.vol,m1.vol\n";
  }
  CHECK_THROWS_WITH_AS(load_cohort(path), doctest::Contains("missing column"), DataError);
}
