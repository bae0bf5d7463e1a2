#pragma once

#include <string>
#include <vector>

namespace amoe::radiomics {

/// Fixed, versioned feature schema. The registry is the single source of
/// truth for feature names and ordering; extract_features emits values in
/// exactly this order.
///
/// Families: 10 first-order, 4 shape, 5 each for GLCM / GLRLM / GLSZM /
/// GLDM / NGTDM (39 total).
struct FeatureSchema {
  std::string version;
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  int index(const std::string& name) const;  // -1 if absent
};

const FeatureSchema& feature_schema();

/// One extracted vector, ordered per the schema.
struct FeatureVector {
  std::string schema_id;
  std::vector<double> values;
};

}  // namespace amoe::radiomics
