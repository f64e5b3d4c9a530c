#include "tot/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "tot/common.hpp"

namespace tot {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.v.assign(shape_numel(t.shape), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t;
  t.shape = std::move(shape);
  t.v.assign(shape_numel(t.shape), value);
  t.validate();
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data) {
  Tensor t;
  t.shape = std::move(shape);
  t.v = std::move(data);
  t.validate();
  return t;
}

Tensor Tensor::vec(std::vector<double> data) {
  // Size must be read before the move; argument evaluation order is
  // unspecified.
  const std::size_t n = data.size();
  return from({n}, std::move(data));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

std::size_t Tensor::rows() const {
  if (shape.size() != 2) throw DimensionError("tensor is not 2-D: " + shape_str());
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw DimensionError("tensor is not 2-D: " + shape_str());
  return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }

double Tensor::at(std::size_t r, std::size_t c) const {
  return v[r * cols() + c];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void Tensor::validate() const {
  if (shape_numel(shape) != v.size())
    throw DimensionError("tensor shape " + shape_str() + " does not match " +
                         std::to_string(v.size()) + " values");
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError("non-finite value in tensor " + shape_str());
}

}  // namespace tot
