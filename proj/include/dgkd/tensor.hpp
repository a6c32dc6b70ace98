#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dgkd {

/// Dense multi-dimensional array of 64-bit floats.
///
/// Value-semantic; product(shape) == data.size() is enforced at construction.
/// The optional grad buffer always matches the data length when present.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t dim) const { return shape_[dim]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// Row-wise softmax(z / temperature) with max-subtraction.
///
/// Input must be rank 2 (batch x classes) and finite; temperature > 0.
Tensor softmax_with_temperature(const Tensor& logits, double temperature);

/// Row-wise log softmax(z / temperature) in log-sum-exp form.
Tensor log_softmax_with_temperature(const Tensor& logits, double temperature);

}  // namespace dgkd
