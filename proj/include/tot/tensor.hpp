#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace tot {

// Dense row-major f64 tensor. Invariants: product(shape) == values.size() and
// every value finite; both enforced by validate(), which every factory and
// every tape op calls on its result.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor vec(std::vector<double> data);
  static Tensor scalar(double value);

  std::size_t size() const { return v.size(); }
  std::size_t rows() const;  // first dim of a 2-D tensor
  std::size_t cols() const;  // second dim of a 2-D tensor
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;

  // Throws NumericError on NaN/Inf, DimensionError on shape/size mismatch.
  void validate() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace tot
