#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace amoe {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset);
std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset);

/// Deterministic splitmix-style 64-bit generator. Identical seed gives an
/// identical sequence on every platform; independent streams are derived by
/// hashing (seed, label) so parallel producers never share state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  static RandomStream derived(std::uint64_t seed, std::string_view label);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double();

  double uniform(double lo, double hi);

  /// Box-Muller; consumes exactly two uniform draws per call.
  double normal(double mean, double sd);

  bool bernoulli(double p);

  /// Uniform index in [0, n), n >= 1.
  std::size_t index(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace amoe
