#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace amoe {

struct ScanRecord {
  std::string patient_id;
  std::string scan_id;
  int label = 0;  // 1 = disease-positive
  std::string volume_path;  // resolved absolute/relative-to-cwd path
  std::string mask_path;
};

/// Patient-keyed scan manifest. The patient index always mirrors `records`.
struct Cohort {
  std::vector<ScanRecord> records;
  std::map<std::string, std::vector<std::size_t>> patient_index;

  std::vector<std::string> patient_ids() const;  // insertion order of first appearance
  void rebuild_index();
  void validate() const;
};

/// Reads a manifest CSV (header: patient_id,scan_id,label,volume_path,mask_path).
/// Relative volume/mask paths are resolved against the manifest's directory.
Cohort load_cohort(const std::string& manifest_path);

/// Writes a manifest with paths as given in the records.
void write_cohort(const Cohort& cohort, const std::string& manifest_path);

}  // namespace amoe
