#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace amoe::nn {

/// Dense row-major tensor of doubles. Rank 1 or 2 covers every network in
/// this project ([rows, cols] matrices, [n] vectors, [1] scalars).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> s, double fill = 0.0);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor vec(std::size_t n, double fill = 0.0);
  static Tensor scalar(double v);
  static Tensor row(const std::vector<double>& values);  // [1, n]

  std::size_t numel() const;
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  void check_finite(const char* what) const;
  std::string shape_str() const;
};

/// Trainable tensor with gradient and AdamW moment state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m1, m2;  // AdamW moments

  explicit Parameter(std::string n, Tensor v);
  void zero_grad();
};

}  // namespace amoe::nn
