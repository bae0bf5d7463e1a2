#include <cmath>

#include "amoe/common.hpp"
#include "amoe/radiomics/features.hpp"

namespace amoe::radiomics {

namespace {

void append(FeatureVector& out, const NamedValues& nv, const FeatureSchema& schema,
            std::size_t& cursor) {
  for (const auto& [name, value] : nv) {
    if (schema.names[cursor] != name) {
      throw InvariantError("feature order mismatch at " + name);
    }
    out.values.push_back(value);
    ++cursor;
  }
}

// Single-level GLCM stand-in for regions with no neighbor pair (isolated
// voxels): same values a one-bin region produces.
NamedValues degenerate_glcm() {
  return {
      {"glcm_contrast", 0.0},
      {"glcm_correlation", 1.0},
      {"glcm_joint_energy", 1.0},
      {"glcm_joint_entropy", 0.0},
      {"glcm_inverse_difference_moment", 1.0},
  };
}

}  // namespace

FeatureVector extract_features(const Volume3D& volume, const RegionMask& mask, RegionId region,
                               double bin_width) {
  const DiscretizedRegion d = discretize(volume, mask, region, bin_width);
  const FeatureSchema& schema = feature_schema();

  FeatureVector out;
  out.schema_id = schema.version;
  out.values.reserve(schema.size());
  std::size_t cursor = 0;

  append(out, first_order_features(d), schema, cursor);
  append(out, shape_features(mask, region, volume.spacing), schema, cursor);
  NamedValues glcm_values;
  try {
    glcm_values = glcm(d).features;
  } catch (const DataError&) {
    glcm_values = degenerate_glcm();
  }
  append(out, glcm_values, schema, cursor);
  append(out, glrlm(d).features, schema, cursor);
  append(out, glszm(d).features, schema, cursor);
  append(out, gldm(d).features, schema, cursor);
  append(out, ngtdm(d).features, schema, cursor);

  if (out.values.size() != schema.size()) {
    throw InvariantError("feature vector length mismatch");
  }
  for (double v : out.values) {
    if (!std::isfinite(v)) throw InvariantError("non-finite feature value");
  }
  return out;
}

}  // namespace amoe::radiomics
