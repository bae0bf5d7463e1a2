#include "amoe/nn/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "amoe/common.hpp"

namespace amoe::nn {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<char*>(b), 8);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated checkpoint " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated checkpoint " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t bits = get_u64(in, path);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "NNCKPT1\n";
  for (const Parameter* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, static_cast<std::uint32_t>(p->value.shape.size()));
    for (std::size_t d : p->value.shape) put_u64(out, d);
    for (double x : p->value.data) put_f64(out, x);
  }
  if (!out) throw DataError("cannot write " + path);
}

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  std::vector<const Parameter*> cps(params.begin(), params.end());
  save_checkpoint(path, cps);
}

void load_checkpoint(const std::string& path, std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header) || header != "NNCKPT1") {
    throw DataError("bad checkpoint header in " + path);
  }

  std::map<std::string, Tensor> loaded;
  while (in.peek() != EOF) {
    const std::uint32_t name_len = get_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint " + path);
    const std::uint32_t rank = get_u32(in, path);
    Tensor t;
    t.shape.resize(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape[i] = static_cast<std::size_t>(get_u64(in, path));
    }
    t.data.resize(t.numel());
    for (double& x : t.data) x = get_f64(in, path);
    loaded.emplace(std::move(name), std::move(t));
  }

  for (Parameter* p : params) {
    auto it = loaded.find(p->name);
    if (it == loaded.end()) throw DataError("checkpoint missing parameter " + p->name);
    if (it->second.shape != p->value.shape) {
      throw DataError("checkpoint shape mismatch for " + p->name);
    }
    p->value = it->second;
    p->zero_grad();
    std::fill(p->m1.data.begin(), p->m1.data.end(), 0.0);
    std::fill(p->m2.data.begin(), p->m2.data.end(), 0.0);
  }
}

}  // namespace amoe::nn
