#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace amoe {

// Error categories aligned with the CLI exit codes:
// usage error -> 1, data error -> 2, invariant violation -> 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest decimal representation that round-trips through double.
std::string fmt_double(double v);

/// Fixed-precision formatting for tables ("%.4f" style).
std::string fmt_fixed(double v, int digits);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must be
/// independent; result ordering is the caller's concern. jobs <= 1 runs inline.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace amoe
