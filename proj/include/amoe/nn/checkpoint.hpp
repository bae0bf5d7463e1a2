#pragma once

#include <string>
#include <vector>

#include "amoe/nn/tensor.hpp"

namespace amoe::nn {

// Versioned binary checkpoint: header line "NNCKPT1\n", then per-parameter
// records: u32 name length, name bytes, u32 rank, u64 dims, f64 data
// (all little-endian).

void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params);
void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

/// Restores values by name; every parameter must be present with a matching
/// shape. Gradients and moments are zeroed.
void load_checkpoint(const std::string& path, std::vector<Parameter*>& params);

}  // namespace amoe::nn
