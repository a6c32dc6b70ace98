#include "dgkd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dgkd/error.hpp"

namespace dgkd {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
  for (std::size_t e : shape_) {
    if (e == 0) throw StructuralError("tensor extents must be positive");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw StructuralError("tensor extents must be positive");
  }
  if (shape_size(shape_) != data_.size()) {
    throw StructuralError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_to_string(shape_));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor log_softmax_with_temperature(const Tensor& logits, double temperature) {
  if (temperature <= 0.0 || !std::isfinite(temperature)) {
    throw ParameterError("temperature must be positive and finite");
  }
  if (logits.rank() != 2) {
    throw StructuralError("softmax expects a batch x classes tensor, got " +
                          shape_to_string(logits.shape()));
  }
  if (!logits.all_finite()) {
    throw NumericError("softmax input contains non-finite values");
  }
  const std::size_t batch = logits.extent(0);
  const std::size_t classes = logits.extent(1);
  Tensor out(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.data() + b * classes;
    double* dst = out.data() + b * classes;
    double mx = row[0];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      dst[k] = (row[k] - mx) / temperature;
      sum += std::exp(dst[k]);
    }
    const double lse = std::log(sum);
    for (std::size_t k = 0; k < classes; ++k) dst[k] -= lse;
  }
  return out;
}

Tensor softmax_with_temperature(const Tensor& logits, double temperature) {
  Tensor out = log_softmax_with_temperature(logits, temperature);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return out;
}

}  // namespace dgkd
