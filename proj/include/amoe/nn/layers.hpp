#pragma once

#include <string>
#include <vector>

#include "amoe/nn/tape.hpp"
#include "amoe/rng.hpp"

namespace amoe::nn {

/// Affine map out = x * W^T + b with W stored [out_dim, in_dim].
struct DenseLayer {
  Parameter W;
  Parameter b;

  DenseLayer(Parameter w, Parameter bias) : W(std::move(w)), b(std::move(bias)) {}
  DenseLayer(const std::string& name, std::size_t in_dim, std::size_t out_dim, RandomStream& rng);
  /// Zero-weight variant (used where equal initial logits are wanted).
  static DenseLayer zeros(const std::string& name, std::size_t in_dim, std::size_t out_dim);

  Tape::Var forward(Tape& t, Tape::Var x) const;
  std::vector<Parameter*> params();
};

Tape::Var dense(Tape& t, Tape::Var x, Parameter& W, Parameter& b);

struct LayerNormLayer {
  Parameter gain;
  Parameter bias;

  LayerNormLayer(const std::string& name, std::size_t dim);
  Tape::Var forward(Tape& t, Tape::Var x) const;
  std::vector<Parameter*> params();
};

/// Standard multi-head self-attention over a [tokens, model_dim] sequence:
/// per-head scaled dot-product (1/sqrt(d_head)), softmax over keys, head
/// concat, output projection.
struct MultiHeadAttention {
  std::size_t n_heads;
  DenseLayer wq, wk, wv, wo;

  MultiHeadAttention(const std::string& name, std::size_t model_dim, std::size_t heads,
                     RandomStream& rng);
  Tape::Var forward(Tape& t, Tape::Var q, Tape::Var k, Tape::Var v) const;
  Tape::Var forward_self(Tape& t, Tape::Var x) const { return forward(t, x, x, x); }
  std::vector<Parameter*> params();
};

/// Glorot-uniform weight init, zero bias.
Tensor glorot_uniform(std::size_t out_dim, std::size_t in_dim, RandomStream& rng);

}  // namespace amoe::nn
