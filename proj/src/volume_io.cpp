#include "amoe/volume_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "amoe/common.hpp"

namespace amoe {

namespace {

struct VolHeader {
  Dims dims;
  Spacing spacing;
  std::string dtype;
};

VolHeader read_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("malformed header in " + path);
  std::istringstream hs(line);
  std::string magic;
  VolHeader h;
  long long d = 0, hh = 0, w = 0;
  if (!(hs >> magic >> d >> hh >> w >> h.spacing.dz >> h.spacing.dy >> h.spacing.dx >> h.dtype) ||
      magic != "VOL1") {
    throw DataError("malformed header in " + path);
  }
  if (d <= 0 || hh <= 0 || w <= 0) throw DataError("malformed header in " + path);
  if (!(h.spacing.dz > 0 && h.spacing.dy > 0 && h.spacing.dx > 0)) {
    throw DataError("non-positive spacing in " + path);
  }
  if (h.dtype != "i16" && h.dtype != "u8") throw DataError("malformed header in " + path);
  h.dims = Dims{static_cast<std::size_t>(d), static_cast<std::size_t>(hh),
                static_cast<std::size_t>(w)};
  return h;
}

void write_header(std::ostream& out, const Dims& dims, const Spacing& sp, const char* dtype) {
  out << "VOL1 " << dims.depth << ' ' << dims.height << ' ' << dims.width << ' '
      << fmt_double(sp.dz) << ' ' << fmt_double(sp.dy) << ' ' << fmt_double(sp.dx) << ' ' << dtype
      << '\n';
}

std::vector<char> read_payload(std::istream& in, std::size_t expected, const std::string& path) {
  std::vector<char> buf(expected);
  in.read(buf.data(), static_cast<std::streamsize>(expected));
  if (static_cast<std::size_t>(in.gcount()) != expected) {
    throw DataError("truncated payload in " + path);
  }
  char extra;
  if (in.read(&extra, 1)) throw DataError("truncated payload in " + path);  // oversized
  return buf;
}

}  // namespace

Volume3D load_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const VolHeader h = read_header(in, path);

  Volume3D v;
  v.dims = h.dims;
  v.spacing = h.spacing;
  const std::size_t n = h.dims.voxel_count();
  v.voxels.resize(n);

  if (h.dtype == "i16") {
    const auto buf = read_payload(in, n * 2, path);
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + 2 * i);
      const std::int16_t raw = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      v.voxels[i] = static_cast<double>(raw);
    }
  } else {
    const auto buf = read_payload(in, n, path);
    for (std::size_t i = 0; i < n; ++i) {
      v.voxels[i] = static_cast<double>(static_cast<unsigned char>(buf[i]));
    }
  }
  v.validate();
  return v;
}

void write_volume(const Volume3D& v, const std::string& path) {
  v.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_header(out, v.dims, v.spacing, "i16");
  std::vector<char> buf(v.voxels.size() * 2);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    const double r = std::round(v.voxels[i]);
    if (r < -32768.0 || r > 32767.0) throw DataError("voxel out of i16 range");
    const auto raw = static_cast<std::int16_t>(r);
    buf[2 * i] = static_cast<char>(raw & 0xFF);
    buf[2 * i + 1] = static_cast<char>((raw >> 8) & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("cannot write " + path);
}

RegionMask load_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const VolHeader h = read_header(in, path);
  if (h.dtype != "u8") throw DataError("mask must be u8: " + path);

  RegionMask m;
  m.dims = h.dims;
  const std::size_t n = h.dims.voxel_count();
  const auto buf = read_payload(in, n, path);
  m.labels.resize(n);
  std::memcpy(m.labels.data(), buf.data(), n);
  m.validate();
  return m;
}

void write_mask(const RegionMask& m, const std::string& path) {
  m.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_header(out, m.dims, Spacing{}, "u8");
  out.write(reinterpret_cast<const char*>(m.labels.data()),
            static_cast<std::streamsize>(m.labels.size()));
  if (!out) throw DataError("cannot write " + path);
}

}  // namespace amoe
