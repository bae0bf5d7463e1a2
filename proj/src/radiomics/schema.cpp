#include "amoe/radiomics/schema.hpp"

namespace amoe::radiomics {

int FeatureSchema::index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const FeatureSchema& feature_schema() {
  static const FeatureSchema schema = [] {
    FeatureSchema s;
    s.version = "radiomics_schema_v1";
    s.names = {
        // first-order (10)
        "firstorder_energy",
        "firstorder_mean",
        "firstorder_variance",
        "firstorder_skewness",
        "firstorder_kurtosis",
        "firstorder_minimum",
        "firstorder_maximum",
        "firstorder_range",
        "firstorder_entropy",
        "firstorder_uniformity",
        // shape (4)
        "shape_volume_mm3",
        "shape_surface_area_mm2",
        "shape_sphericity",
        "shape_compactness",
        // GLCM (5)
        "glcm_contrast",
        "glcm_correlation",
        "glcm_joint_energy",
        "glcm_joint_entropy",
        "glcm_inverse_difference_moment",
        // GLRLM (5)
        "glrlm_short_run_emphasis",
        "glrlm_long_run_emphasis",
        "glrlm_run_length_nonuniformity",
        "glrlm_gray_level_nonuniformity",
        "glrlm_run_percentage",
        // GLSZM (5)
        "glszm_small_area_emphasis",
        "glszm_large_area_emphasis",
        "glszm_size_zone_nonuniformity",
        "glszm_gray_level_nonuniformity",
        "glszm_zone_percentage",
        // GLDM (5)
        "gldm_small_dependence_emphasis",
        "gldm_large_dependence_emphasis",
        "gldm_dependence_nonuniformity",
        "gldm_gray_level_nonuniformity",
        "gldm_dependence_entropy",
        // NGTDM (5)
        "ngtdm_coarseness",
        "ngtdm_busyness",
        "ngtdm_contrast",
        "ngtdm_complexity",
        "ngtdm_strength",
    };
    return s;
  }();
  return schema;
}

}  // namespace amoe::radiomics
