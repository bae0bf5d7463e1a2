#include "amoe/pipeline/ledger.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "amoe/common.hpp"
#include "amoe/rng.hpp"

namespace amoe::pipeline {

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file " + path);
  std::uint64_t h = kFnvOffset;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    if (!in) break;
  }
  return h;
}

RunLedger::RunLedger(std::string path) : path_(std::move(path)) {}

void RunLedger::load() {
  entries_.clear();
  std::ifstream in(path_);
  if (!in) return;  // first run
  std::string line;
  Entry cur;
  std::string stage;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "STAGE") {
      cur = Entry{};
      ls >> stage >> cur.millis;
    } else if (tag == "IN" || tag == "OUT") {
      std::string path;
      std::uint64_t hash;
      ls >> path >> hash;
      (tag == "IN" ? cur.inputs : cur.outputs).push_back({path, hash});
    } else if (tag == "END") {
      entries_[stage] = cur;
    }
  }
}

void RunLedger::save() const {
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw DataError("cannot write ledger " + path_);
  for (const auto& [stage, e] : entries_) {
    out << "STAGE " << stage << ' ' << e.millis << '\n';
    for (const auto& [p, h] : e.inputs) out << "IN " << p << ' ' << h << '\n';
    for (const auto& [p, h] : e.outputs) out << "OUT " << p << ' ' << h << '\n';
    out << "END\n";
  }
}

bool RunLedger::stage_fresh(const std::string& stage,
                            const std::vector<std::string>& inputs) const {
  auto it = entries_.find(stage);
  if (it == entries_.end()) return false;

  // Current inputs must match what the stage consumed last time.
  if (inputs.size() != it->second.inputs.size()) return false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& [path, hash] = it->second.inputs[i];
    if (path != inputs[i]) return false;
    if (!std::filesystem::exists(path) || hash_file(path) != hash) return false;
  }
  // All recorded outputs must still exist unchanged.
  for (const auto& [path, hash] : it->second.outputs) {
    if (!std::filesystem::exists(path) || hash_file(path) != hash) return false;
  }
  return true;
}

void RunLedger::record(const std::string& stage, const std::vector<std::string>& inputs,
                       const std::vector<std::string>& outputs, long long millis) {
  Entry e;
  e.millis = millis;
  for (const auto& p : inputs) e.inputs.push_back({p, hash_file(p)});
  for (const auto& p : outputs) e.outputs.push_back({p, hash_file(p)});
  entries_[stage] = e;
  save();
}

}  // namespace amoe::pipeline
