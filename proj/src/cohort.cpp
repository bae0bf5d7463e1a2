#include "amoe/cohort.hpp"

#include <filesystem>
#include <set>

#include "amoe/common.hpp"
#include "amoe/csv.hpp"

namespace amoe {

std::vector<std::string> Cohort::patient_ids() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.patient_id).second) ids.push_back(r.patient_id);
  }
  return ids;
}

void Cohort::rebuild_index() {
  patient_index.clear();
  for (std::size_t i = 0; i < records.size(); ++i) {
    patient_index[records[i].patient_id].push_back(i);
  }
}

void Cohort::validate() const {
  if (records.empty()) throw DataError("empty cohort");
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& r : records) {
    if (r.label != 0 && r.label != 1) throw DataError("label outside {0,1}");
    if (!keys.insert({r.patient_id, r.scan_id}).second) {
      throw DataError("duplicate scan: " + r.patient_id + "/" + r.scan_id);
    }
  }
  std::size_t indexed = 0;
  for (const auto& [pid, idxs] : patient_index) {
    if (idxs.empty()) throw DataError("patient with no scans: " + pid);
    for (std::size_t i : idxs) {
      if (i >= records.size() || records[i].patient_id != pid) {
        throw DataError("patient index inconsistent");
      }
    }
    indexed += idxs.size();
  }
  if (indexed != records.size()) throw DataError("patient index inconsistent");
}

Cohort load_cohort(const std::string& manifest_path) {
  const CsvTable t = read_csv(manifest_path);
  const int c_pid = t.require_column("patient_id");
  const int c_sid = t.require_column("scan_id");
  const int c_label = t.require_column("label");
  const int c_vol = t.require_column("volume_path");
  const int c_mask = t.require_column("mask_path");
  if (t.rows.empty()) throw DataError("empty cohort");

  const auto base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (base / fp).string();
  };

  Cohort c;
  for (const auto& row : t.rows) {
    ScanRecord r;
    r.patient_id = row[c_pid];
    r.scan_id = row[c_sid];
    const std::string& ls = row[c_label];
    if (ls == "0") {
      r.label = 0;
    } else if (ls == "1") {
      r.label = 1;
    } else {
      throw DataError("label outside {0,1}: " + ls);
    }
    r.volume_path = resolve(row[c_vol]);
    r.mask_path = resolve(row[c_mask]);
    c.records.push_back(std::move(r));
  }
  c.rebuild_index();
  c.validate();
  return c;
}

void write_cohort(const Cohort& cohort, const std::string& manifest_path) {
  CsvTable t;
  t.header = {"patient_id", "scan_id", "label", "volume_path", "mask_path"};
  for (const auto& r : cohort.records) {
    t.rows.push_back({r.patient_id, r.scan_id, std::to_string(r.label), r.volume_path,
                      r.mask_path});
  }
  write_csv(manifest_path, t);
}

}  // namespace amoe
