#pragma once

#include <string>
#include <vector>

namespace amoe {

// Minimal comma-separated tables. Fields are plain text without embedded
// commas or newlines, which covers every format this project reads or writes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
  int require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace amoe
