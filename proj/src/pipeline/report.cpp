#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <vector>

#include "amoe/common.hpp"
#include "amoe/csv.hpp"
#include "amoe/pipeline/stages.hpp"

namespace amoe::pipeline {

std::string format_change_percent(double method_mean, double baseline_mean) {
  const double pct = (method_mean - baseline_mean) / baseline_mean * 100.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f%%", pct);
  return buf;
}

namespace {

struct SummaryRow {
  std::string method;
  double mean = 0, sd = 0, ci_lo = 0, ci_hi = 0;
  std::string p;
};

std::string format_metrics(const SummaryRow& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.4f \xC2\xB1 %.4f [%.3f, %.3f]", r.mean, r.sd, r.ci_lo,
                r.ci_hi);
  return buf;
}

int group_of(const std::string& method) {
  if (method == "baseline_global") return 0;
  if (method.rfind("uniform_", 0) == 0 || method.rfind("val_auc_weighted_", 0) == 0 ||
      method.rfind("best_gate_", 0) == 0) {
    return 1;
  }
  if (method.rfind("stage4_", 0) == 0) return 2;
  return 3;  // regional experts and anything else
}

}  // namespace

void cmd_report(const std::string& out_dir, std::ostream& os) {
  const auto path = (std::filesystem::path(out_dir) / "summary.csv").string();
  const CsvTable t = read_csv(path);
  if (t.rows.empty()) throw DataError("no results in " + path);

  const int c_method = t.require_column("method");
  const int c_mean = t.require_column("mean");
  const int c_sd = t.require_column("sd");
  const int c_lo = t.require_column("ci_lo");
  const int c_hi = t.require_column("ci_hi");
  const int c_p = t.require_column("p_vs_baseline");

  std::vector<SummaryRow> rows;
  double baseline_mean = -1;
  for (const auto& r : t.rows) {
    SummaryRow row;
    row.method = r[c_method];
    row.mean = std::strtod(r[c_mean].c_str(), nullptr);
    row.sd = std::strtod(r[c_sd].c_str(), nullptr);
    row.ci_lo = std::strtod(r[c_lo].c_str(), nullptr);
    row.ci_hi = std::strtod(r[c_hi].c_str(), nullptr);
    row.p = r[c_p];
    if (row.method == "baseline_global") baseline_mean = row.mean;
    rows.push_back(std::move(row));
  }

  static const char* kGroupNames[4] = {"Baseline", "Validation-Weighted", "End-to-End Gated MoE",
                                       "Regional Experts"};
  char line[160];
  std::snprintf(line, sizeof(line), "%-34s %-34s %9s %9s", "Method", "AUC \xC2\xB1 SD [95% CI]",
                "Change", "p-value");
  os << line << '\n';
  os << std::string(90, '-') << '\n';

  for (int group = 0; group < 4; ++group) {
    bool any = false;
    for (const auto& r : rows) any = any || group_of(r.method) == group;
    if (!any) continue;
    os << "-- " << kGroupNames[group] << " --\n";
    for (const auto& r : rows) {
      if (group_of(r.method) != group) continue;
      std::string change = "--";
      std::string p = r.p.empty() ? "--" : r.p;
      if (r.method != "baseline_global" && baseline_mean > 0) {
        change = format_change_percent(r.mean, baseline_mean);
      }
      if (!r.p.empty()) {
        char pb[16];
        std::snprintf(pb, sizeof(pb), "%.3f", std::strtod(r.p.c_str(), nullptr));
        p = pb;
      }
      std::snprintf(line, sizeof(line), "%-34s %-36s %9s %9s", r.method.c_str(),
                    format_metrics(r).c_str(), change.c_str(), p.c_str());
      os << line << '\n';
    }
  }
}

}  // namespace amoe::pipeline
