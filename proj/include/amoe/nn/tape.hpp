#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "amoe/nn/tensor.hpp"

namespace amoe::nn {

/// Reverse-mode autodiff on a per-forward-pass tape. Every op records its
/// value and a backward closure; backward() replays the tape in reverse and
/// accumulates leaf gradients into their Parameters. Forward values are
/// checked finite after every op.
class Tape {
 public:
  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
  };

  Var constant(Tensor t);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad_of(Var v) const { return nodes_[v.id].grad; }

  // Elementwise (same shape unless noted).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scalar_mul(Var a, double c);
  Var add_scalar(Var a, double c);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var log_op(Var a);    // requires strictly positive input
  Var abs_op(Var a);
  Var sqrt_op(Var a);   // requires nonnegative input

  // Linear algebra on rank-2 tensors.
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_rowvec(Var x, Var b);        // broadcast [n] bias over rows
  Var mul_rowvec(Var x, Var v);        // column j scaled by v[j]
  Var scale_rows(Var x, Var s);        // row i scaled by s[i]
  Var slice_cols(Var a, std::size_t c0, std::size_t c1);  // [c0, c1)
  Var concat_cols(const std::vector<Var>& vs);
  Var concat_rows(const std::vector<Var>& vs);

  // Reductions / row ops.
  Var row_sum(Var a);   // [m,n] -> [m,1]
  Var row_softmax(Var a);
  Var sum(Var a);       // -> [1]
  Var mean(Var a);      // -> [1]

  /// Row-wise normalization to zero mean / unit variance (eps = 1e-5) then
  /// elementwise gain and bias (both [n]).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

  /// Mean binary cross-entropy on probabilities. Targets are mapped to
  /// [s/2, 1 - s/2] by label smoothing s; probabilities are clamped to
  /// [1e-7, 1 - 1e-7] before the log.
  Var bce_with_probs(Var p, const Tensor& targets, double label_smoothing);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
    Parameter* leaf = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;

  Var make(Tensor value, bool requires_grad, std::function<void(Tape&)> back, const char* what);
  Tensor& g(std::size_t id) { return nodes_[id].grad; }
  const Tensor& v(std::size_t id) const { return nodes_[id].value; }
  bool rg(Var a) const { return nodes_[a.id].requires_grad; }
};

}  // namespace amoe::nn
