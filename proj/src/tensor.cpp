#include "fedet/tensor.hpp"

#include <cmath>
#include <utility>

#include "fedet/errors.hpp"

namespace fedet {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t dim : shape) n *= dim;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (data.size() != shape_numel(shape)) {
    throw DimensionError("tensor data length does not match shape");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_in) {
  std::size_t n = shape_numel(shape_in);
  return Tensor(std::move(shape_in), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
  std::vector<std::size_t> shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fedet
