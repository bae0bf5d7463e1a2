#include "amoe/rng.hpp"

#include <cmath>

namespace amoe {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) { return fnv1a(s.data(), s.size(), h); }

namespace {
std::uint64_t splitmix_scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace

RandomStream RandomStream::derived(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = fnv1a(&seed, sizeof(seed));
  h = fnv1a(label, h);
  return RandomStream(splitmix_scramble(h));
}

std::uint64_t RandomStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  return splitmix_scramble(state_);
}

double RandomStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double RandomStream::normal(double mean, double sd) {
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + sd * r * std::cos(2.0 * M_PI * u2);
}

bool RandomStream::bernoulli(double p) { return next_double() < p; }

std::size_t RandomStream::index(std::size_t n) {
  // 53-bit scaling; bias is negligible for the index ranges used here.
  return static_cast<std::size_t>(next_double() * static_cast<double>(n));
}

}  // namespace amoe
