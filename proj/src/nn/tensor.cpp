#include "amoe/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "amoe/common.hpp"

namespace amoe::nn {

Tensor::Tensor(std::initializer_list<std::size_t> s, double fill) : shape(s) {
  data.assign(numel(), fill);
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

Tensor Tensor::vec(std::size_t n, double fill) { return Tensor({n}, fill); }

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data[0] = v;
  return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
  Tensor t({1, values.size()});
  t.data = values;
  return t;
}

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return shape.empty() ? 0 : n;
}

void Tensor::check_finite(const char* what) const {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw InvariantError(std::string("non-finite value in ") + what);
    }
  }
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
  grad = value;
  m1 = value;
  m2 = value;
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  std::fill(m1.data.begin(), m1.data.end(), 0.0);
  std::fill(m2.data.begin(), m2.data.end(), 0.0);
}

void Parameter::zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }

}  // namespace amoe::nn
