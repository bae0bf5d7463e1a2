#include <cmath>
#include <map>

#include "amoe/common.hpp"
#include "amoe/radiomics/features.hpp"
#include "amoe/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace amoe;
using namespace amoe::radiomics;

namespace {

struct Scene {
  Volume3D vol;
  RegionMask mask;
};

/// Region = all voxels with mask label 1; everything else label 0.
Scene make_scene(Dims dims, const std::function<bool(int, int, int)>& in_region,
                 const std::function<double(int, int, int)>& hu) {
  Scene s;
  s.vol.dims = dims;
  s.vol.spacing = {1, 1, 1};
  s.vol.voxels.assign(dims.voxel_count(), 0.0);
  s.mask.dims = dims;
  s.mask.labels.assign(dims.voxel_count(), 0);
  for (std::size_t z = 0; z < dims.depth; ++z)
    for (std::size_t y = 0; y < dims.height; ++y)
      for (std::size_t x = 0; x < dims.width; ++x) {
        const int zi = static_cast<int>(z), yi = static_cast<int>(y), xi = static_cast<int>(x);
        s.vol.voxels[s.vol.flat(z, y, x)] = hu(zi, yi, xi);
        if (in_region(zi, yi, xi)) s.mask.labels[s.mask.flat(z, y, x)] = 1;
      }
  return s;
}

Scene random_scene(RandomStream& rng, std::size_t max_side) {
  const Dims dims{2 + rng.index(max_side - 1), 2 + rng.index(max_side - 1),
                  2 + rng.index(max_side - 1)};
  // Bernoulli membership with at least one guaranteed adjacent pair.
  std::vector<char> member(dims.voxel_count(), 0);
  for (auto& m : member) m = rng.bernoulli(0.7) ? 1 : 0;
  member[0] = member[1 % member.size()] = 1;
  std::size_t k = 0;
  auto keep = [&](int, int, int) { return member[k++] != 0; };
  auto hu = [&rng](int, int, int) { return std::floor(rng.uniform(-50, 50)); };
  return make_scene(dims, keep, hu);
}

double feature_of(const NamedValues& nv, const std::string& name) {
  for (const auto& [n, v] : nv) {
    if (n == name) return v;
  }
  FAIL("missing feature ", name);
  return 0;
}

void check_matrix_equals_oracle(const TextureMatrix& m,
                                const std::map<std::pair<int, int>, double>& expect,
                                int col_offset = 1) {
  double expect_total = 0;
  for (const auto& [key, count] : expect) {
    const auto [g, c] = key;
    REQUIRE(static_cast<std::size_t>(g) <= m.rows);
    REQUIRE(static_cast<std::size_t>(c - col_offset) < m.cols);
    REQUIRE(m.count_at(g - 1, static_cast<std::size_t>(c - col_offset)) == count);
    expect_total += count;
  }
  double total = 0;
  for (double c : m.counts) total += c;
  REQUIRE(total == expect_total);  // no extra entries anywhere
  REQUIRE(m.total == expect_total);
}

}  // namespace

TEST_CASE("discretize: constant region and exact bin edges") {
  auto s = make_scene({2, 2, 2}, [](int, int, int) { return true; },
                      [](int, int, int) { return -500.0; });
  auto d = discretize(s.vol, s.mask, RegionId::LUL, 25.0);
  CHECK(d.bin_count == 1);
  for (int b : d.bins) CHECK(b == 1);

  auto s2 = make_scene({1, 1, 3}, [](int, int, int) { return true; },
                       [](int, int, int x) { return 25.0 * x; });
  auto d2 = discretize(s2.vol, s2.mask, RegionId::LUL, 25.0);
  REQUIRE(d2.bins.size() == 3);
  CHECK(d2.bins[0] == 1);
  CHECK(d2.bins[1] == 2);
  CHECK(d2.bins[2] == 3);

  CHECK_THROWS_AS(discretize(s2.vol, s2.mask, RegionId::RLL, 25.0), DataError);
}

TEST_CASE("discretize: matches independent scalar loop on random voxels") {
  RandomStream rng(301);
  for (int rep = 0; rep < 10; ++rep) {
    auto s = random_scene(rng, 7);
    if (region_voxel_count(s.mask, RegionId::LUL) == 0) continue;
    auto d = discretize(s.vol, s.mask, RegionId::LUL, 25.0);
    auto ref = oracle::discretize_region(s.vol, s.mask, RegionId::LUL, 25.0);
    REQUIRE(d.size() == ref.bins.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      const auto& c = d.coords[k];
      REQUIRE(d.bins[k] == ref.bin_at(c.z, c.y, c.x));
    }
  }
}

TEST_CASE("first order: degenerate and symmetric cases") {
  auto s = make_scene({2, 2, 2}, [](int, int, int) { return true; },
                      [](int, int, int) { return 77.0; });
  auto f = first_order_features(discretize(s.vol, s.mask, RegionId::LUL));
  CHECK(feature_of(f, "firstorder_variance") == 0.0);
  CHECK(feature_of(f, "firstorder_skewness") == 0.0);
  CHECK(feature_of(f, "firstorder_kurtosis") == 0.0);
  CHECK(feature_of(f, "firstorder_uniformity") == 1.0);
  CHECK(feature_of(f, "firstorder_entropy") == 0.0);
  CHECK(feature_of(f, "firstorder_range") == 0.0);

  auto s2 = make_scene({1, 1, 2}, [](int, int, int) { return true; },
                       [](int, int, int x) { return x == 0 ? -1.0 : 1.0; });
  auto f2 = first_order_features(discretize(s2.vol, s2.mask, RegionId::LUL));
  CHECK(feature_of(f2, "firstorder_mean") == doctest::Approx(0.0));
  CHECK(feature_of(f2, "firstorder_variance") == doctest::Approx(1.0));
  CHECK(feature_of(f2, "firstorder_skewness") == doctest::Approx(0.0));
}

TEST_CASE("first order: moments match two-pass oracle on 500 random values") {
  RandomStream rng(88);
  auto s = make_scene({5, 10, 10}, [](int, int, int) { return true; },
                      [&rng](int, int, int) { return std::floor(rng.uniform(-900, 300)); });
  auto d = discretize(s.vol, s.mask, RegionId::LUL);
  auto f = first_order_features(d);
  auto ref = oracle::moments_twopass(d.raw_hu);
  CHECK(feature_of(f, "firstorder_mean") == doctest::Approx(ref.mean).epsilon(1e-10));
  CHECK(feature_of(f, "firstorder_variance") == doctest::Approx(ref.variance).epsilon(1e-10));
  CHECK(feature_of(f, "firstorder_skewness") == doctest::Approx(ref.skewness).epsilon(1e-10));
  CHECK(feature_of(f, "firstorder_kurtosis") == doctest::Approx(ref.kurtosis).epsilon(1e-10));
}

TEST_CASE("shape: single voxel, cube, and spacing scaling") {
  auto s = make_scene({3, 3, 3}, [](int z, int y, int x) { return z == 1 && y == 1 && x == 1; },
                      [](int, int, int) { return 0.0; });
  auto f = shape_features(s.mask, RegionId::LUL, {1, 1, 1});
  CHECK(feature_of(f, "shape_volume_mm3") == doctest::Approx(1.0));
  CHECK(feature_of(f, "shape_surface_area_mm2") == doctest::Approx(6.0));
  // pi^(1/3) * 6^(2/3) / 6
  const double expected_sphericity = std::cbrt(M_PI) * std::pow(6.0, 2.0 / 3.0) / 6.0;
  CHECK(feature_of(f, "shape_sphericity") == doctest::Approx(expected_sphericity).epsilon(1e-10));
  CHECK(expected_sphericity == doctest::Approx(0.80600).epsilon(1e-4));

  auto cube = make_scene({4, 4, 4}, [](int z, int y, int x) { return z < 2 && y < 2 && x < 2; },
                         [](int, int, int) { return 0.0; });
  auto fc = shape_features(cube.mask, RegionId::LUL, {1, 1, 1});
  CHECK(feature_of(fc, "shape_volume_mm3") == doctest::Approx(8.0));
  CHECK(feature_of(fc, "shape_surface_area_mm2") == doctest::Approx(24.0));

  auto fd = shape_features(cube.mask, RegionId::LUL, {2, 2, 2});
  CHECK(feature_of(fd, "shape_volume_mm3") == doctest::Approx(64.0));
  CHECK(feature_of(fd, "shape_surface_area_mm2") == doctest::Approx(96.0));
}

TEST_CASE("glcm: constant region and alternating strip") {
  auto s = make_scene({2, 2, 2}, [](int, int, int) { return true; },
                      [](int, int, int) { return 5.0; });
  auto r = glcm(discretize(s.vol, s.mask, RegionId::LUL));
  REQUIRE(r.matrix.rows == 1);
  CHECK(r.matrix.norm_at(0, 0) == doctest::Approx(1.0));
  CHECK(feature_of(r.features, "glcm_contrast") == 0.0);
  CHECK(feature_of(r.features, "glcm_joint_energy") == doctest::Approx(1.0));
  CHECK(feature_of(r.features, "glcm_joint_entropy") == doctest::Approx(0.0));

  // Single line of bins 1,2,1,2: three symmetric (1,2) pairs.
  auto strip = make_scene({1, 1, 4}, [](int, int, int) { return true; },
                          [](int, int, int x) { return x % 2 == 0 ? 0.0 : 25.0; });
  auto rs = glcm(discretize(strip.vol, strip.mask, RegionId::LUL, 25.0));
  CHECK(rs.matrix.norm_at(0, 1) == doctest::Approx(0.5));
  CHECK(rs.matrix.norm_at(1, 0) == doctest::Approx(0.5));
  CHECK(feature_of(rs.features, "glcm_contrast") == doctest::Approx(1.0));
}

TEST_CASE("glcm: equals pair-enumeration oracle on random regions") {
  RandomStream rng(555);
  for (int rep = 0; rep < 20; ++rep) {
    auto s = random_scene(rng, 6);
    auto d = discretize(s.vol, s.mask, RegionId::LUL);
    auto ref = oracle::discretize_region(s.vol, s.mask, RegionId::LUL, kDefaultBinWidthHu);
    auto r = glcm(d);
    check_matrix_equals_oracle(r.matrix, oracle::glcm_counts(ref));
    // Normalized matrix sums to 1.
    double total = 0;
    for (double p : r.matrix.normalized) total += p;
    REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("glrlm/glszm: constant cube counts") {
  auto s = make_scene({3, 3, 3}, [](int, int, int) { return true; },
                      [](int, int, int) { return -100.0; });
  auto d = discretize(s.vol, s.mask, RegionId::LUL);

  auto rl = glrlm(d);
  // One run per direction: 13 runs of length 27.
  CHECK(rl.matrix.total == doctest::Approx(13.0));
  CHECK(rl.matrix.count_at(0, 26) == doctest::Approx(13.0));
  CHECK(feature_of(rl.features, "glrlm_run_percentage") == doctest::Approx(1.0 / 27.0));

  auto sz = glszm(d);
  CHECK(sz.matrix.total == doctest::Approx(1.0));
  CHECK(sz.matrix.count_at(0, 26) == doctest::Approx(1.0));
  CHECK(feature_of(sz.features, "glszm_zone_percentage") == doctest::Approx(1.0 / 27.0));
}

TEST_CASE("gldm/ngtdm: single voxel degeneracies") {
  auto s = make_scene({3, 3, 3}, [](int z, int y, int x) { return z == 0 && y == 0 && x == 0; },
                      [](int, int, int) { return 10.0; });
  auto d = discretize(s.vol, s.mask, RegionId::LUL);

  auto g = gldm(d);
  REQUIRE(g.matrix.cols == 1);  // dependence 0 only
  CHECK(g.matrix.count_at(0, 0) == doctest::Approx(1.0));

  auto n = ngtdm(d);
  CHECK(feature_of(n.features, "ngtdm_coarseness") == doctest::Approx(1e6));
  CHECK(feature_of(n.features, "ngtdm_busyness") == 0.0);
  CHECK(feature_of(n.features, "ngtdm_contrast") == 0.0);
}

TEST_CASE("texture families: equal brute-force oracles on random regions") {
  RandomStream rng(777);
  for (int rep = 0; rep < 15; ++rep) {
    auto s = random_scene(rng, 5);
    auto d = discretize(s.vol, s.mask, RegionId::LUL);
    auto ref = oracle::discretize_region(s.vol, s.mask, RegionId::LUL, kDefaultBinWidthHu);

    check_matrix_equals_oracle(glrlm(d).matrix, oracle::glrlm_counts(ref));
    check_matrix_equals_oracle(glszm(d).matrix, oracle::glszm_counts(ref));
    check_matrix_equals_oracle(gldm(d).matrix, oracle::gldm_counts(ref), 0);

    auto rows = oracle::ngtdm_rows(ref);
    auto n = ngtdm(d);
    for (const auto& [bin, row] : rows) {
      REQUIRE(n.matrix.count_at(bin - 1, 0) == row.n);
      REQUIRE(n.matrix.count_at(bin - 1, 2) == doctest::Approx(row.s).epsilon(1e-12));
    }
    double psum = 0;
    for (std::size_t gi = 0; gi < n.matrix.rows; ++gi) psum += n.matrix.count_at(gi, 1);
    REQUIRE(psum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("glrlm: run-length mass conserved") {
  RandomStream rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    auto s = random_scene(rng, 6);
    auto d = discretize(s.vol, s.mask, RegionId::LUL);
    auto r = glrlm(d);
    double mass = 0;
    for (std::size_t g = 0; g < r.matrix.rows; ++g)
      for (std::size_t c = 0; c < r.matrix.cols; ++c)
        mass += r.matrix.count_at(g, c) * static_cast<double>(c + 1);
    REQUIRE(mass == doctest::Approx(13.0 * static_cast<double>(d.size())));
  }
}

TEST_CASE("extract_features: constant-region degenerate table") {
  auto s = make_scene({3, 3, 3}, [](int, int, int) { return true; },
                      [](int, int, int) { return -400.0; });
  auto fv = extract_features(s.vol, s.mask, RegionId::LUL);
  const auto& schema = feature_schema();
  REQUIRE(fv.values.size() == schema.size());
  auto get = [&](const std::string& name) { return fv.values[schema.index(name)]; };

  CHECK(get("firstorder_variance") == 0.0);
  CHECK(get("firstorder_entropy") == 0.0);
  CHECK(get("firstorder_uniformity") == 1.0);
  CHECK(get("glcm_contrast") == 0.0);
  CHECK(get("glcm_joint_energy") == 1.0);
  CHECK(get("glcm_joint_entropy") == 0.0);
  CHECK(get("glcm_correlation") == 1.0);
  CHECK(get("glcm_inverse_difference_moment") == 1.0);
  CHECK(get("glrlm_run_percentage") == doctest::Approx(1.0 / 27));
  CHECK(get("glszm_zone_percentage") == doctest::Approx(1.0 / 27));
  CHECK(get("gldm_dependence_entropy") >= 0.0);
  CHECK(get("ngtdm_coarseness") == doctest::Approx(1e6));
  CHECK(get("ngtdm_busyness") == 0.0);
  CHECK(get("ngtdm_strength") == 0.0);
}

TEST_CASE("extract_features: deterministic and schema-length") {
  RandomStream rng(12);
  auto s = random_scene(rng, 6);
  auto a = extract_features(s.vol, s.mask, RegionId::LUL);
  auto b = extract_features(s.vol, s.mask, RegionId::LUL);
  CHECK(a.values == b.values);
  CHECK(a.values.size() == feature_schema().size());
  CHECK(a.schema_id == feature_schema().version);
}

TEST_CASE("extract_features: integer HU shift leaves texture bit-identical") {
  RandomStream rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    auto s = random_scene(rng, 6);
    auto base = extract_features(s.vol, s.mask, RegionId::LUL);

    Scene shifted = s;
    const double c = 137.0;
    for (double& v : shifted.vol.voxels) v += c;
    auto moved = extract_features(shifted.vol, shifted.mask, RegionId::LUL);

    const auto& schema = feature_schema();
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const std::string& name = schema.names[i];
      if (name == "firstorder_mean") {
        REQUIRE(moved.values[i] - base.values[i] == doctest::Approx(c).epsilon(1e-12));
      } else if (name == "firstorder_minimum" || name == "firstorder_maximum") {
        REQUIRE(moved.values[i] == base.values[i] + c);
      } else if (name == "firstorder_energy") {
        continue;  // energy is not translation invariant by construction
      } else {
        REQUIRE(moved.values[i] == base.values[i]);  // bit-exact
      }
    }
  }
}

TEST_CASE("extract_features: out-of-region voxels never influence features") {
  RandomStream rng(44);
  for (int rep = 0; rep < 5; ++rep) {
    auto s = random_scene(rng, 6);
    auto base = extract_features(s.vol, s.mask, RegionId::LUL);

    Scene scrambled = s;
    for (std::size_t i = 0; i < scrambled.vol.voxels.size(); ++i) {
      if (scrambled.mask.labels[i] != 1) {
        scrambled.vol.voxels[i] = std::floor(rng.uniform(-3000, 3000));
      }
    }
    auto noisy = extract_features(scrambled.vol, scrambled.mask, RegionId::LUL);
    REQUIRE(noisy.values == base.values);  // bit-exact
  }
}
