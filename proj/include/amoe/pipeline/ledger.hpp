#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace amoe::pipeline {

/// 64-bit FNV-1a over the file's bytes.
std::uint64_t hash_file(const std::string& path);

/// Per-stage completion records with content hashes of inputs and outputs.
/// A stage is fresh when a record exists and every recorded hash matches the
/// file currently on disk; any upstream stage that re-ran marks everything
/// downstream stale regardless.
class RunLedger {
 public:
  explicit RunLedger(std::string path);

  struct Entry {
    std::vector<std::pair<std::string, std::uint64_t>> inputs;
    std::vector<std::pair<std::string, std::uint64_t>> outputs;
    long long millis = 0;
  };

  void load();
  void save() const;

  bool stage_fresh(const std::string& stage, const std::vector<std::string>& inputs) const;
  void record(const std::string& stage, const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs, long long millis);

 private:
  std::string path_;
  std::map<std::string, Entry> entries_;
};

}  // namespace amoe::pipeline
