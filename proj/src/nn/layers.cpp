#include "amoe/nn/layers.hpp"

#include <cmath>

#include "amoe/common.hpp"

namespace amoe::nn {

Tensor glorot_uniform(std::size_t out_dim, std::size_t in_dim, RandomStream& rng) {
  Tensor w({out_dim, in_dim});
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (double& x : w.data) x = rng.uniform(-bound, bound);
  return w;
}

DenseLayer::DenseLayer(const std::string& name, std::size_t in_dim, std::size_t out_dim,
                       RandomStream& rng)
    : W(name + ".W", glorot_uniform(out_dim, in_dim, rng)),
      b(name + ".b", Tensor::vec(out_dim)) {}

DenseLayer DenseLayer::zeros(const std::string& name, std::size_t in_dim, std::size_t out_dim) {
  DenseLayer l{Parameter(name + ".W", Tensor::zeros(out_dim, in_dim)),
               Parameter(name + ".b", Tensor::vec(out_dim))};
  return l;
}

Tape::Var DenseLayer::forward(Tape& t, Tape::Var x) const {
  return dense(t, x, const_cast<Parameter&>(W), const_cast<Parameter&>(b));
}

std::vector<Parameter*> DenseLayer::params() { return {&W, &b}; }

Tape::Var dense(Tape& t, Tape::Var x, Parameter& W, Parameter& b) {
  auto w = t.param(W);
  auto bias = t.param(b);
  return t.add_rowvec(t.matmul(x, t.transpose(w)), bias);
}

LayerNormLayer::LayerNormLayer(const std::string& name, std::size_t dim)
    : gain(name + ".gain", Tensor::vec(dim, 1.0)), bias(name + ".bias", Tensor::vec(dim)) {}

Tape::Var LayerNormLayer::forward(Tape& t, Tape::Var x) const {
  return t.layer_norm(x, t.param(const_cast<Parameter&>(gain)),
                      t.param(const_cast<Parameter&>(bias)));
}

std::vector<Parameter*> LayerNormLayer::params() { return {&gain, &bias}; }

MultiHeadAttention::MultiHeadAttention(const std::string& name, std::size_t model_dim,
                                       std::size_t heads, RandomStream& rng)
    : n_heads(heads),
      wq(name + ".q", model_dim, model_dim, rng),
      wk(name + ".k", model_dim, model_dim, rng),
      wv(name + ".v", model_dim, model_dim, rng),
      wo(name + ".o", model_dim, model_dim, rng) {
  if (model_dim % heads != 0) throw UsageError("attention: model dim not divisible by heads");
}

Tape::Var MultiHeadAttention::forward(Tape& t, Tape::Var q, Tape::Var k, Tape::Var v) const {
  const std::size_t model_dim = t.value(q).shape[1];
  const std::size_t d_head = model_dim / n_heads;
  auto Q = wq.forward(t, q);
  auto K = wk.forward(t, k);
  auto V = wv.forward(t, v);

  std::vector<Tape::Var> heads;
  heads.reserve(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));
  for (std::size_t h = 0; h < n_heads; ++h) {
    auto Qh = t.slice_cols(Q, h * d_head, (h + 1) * d_head);
    auto Kh = t.slice_cols(K, h * d_head, (h + 1) * d_head);
    auto Vh = t.slice_cols(V, h * d_head, (h + 1) * d_head);
    auto scores = t.scalar_mul(t.matmul(Qh, t.transpose(Kh)), scale);
    auto attn = t.row_softmax(scores);
    heads.push_back(t.matmul(attn, Vh));
  }
  return wo.forward(t, t.concat_cols(heads));
}

std::vector<Parameter*> MultiHeadAttention::params() {
  std::vector<Parameter*> ps;
  for (auto* layer : {&wq, &wk, &wv, &wo}) {
    for (auto* p : layer->params()) ps.push_back(p);
  }
  return ps;
}

}  // namespace amoe::nn
