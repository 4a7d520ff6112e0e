#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace chanprune {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array. Tensor (float32) holds parameters, inputs and
/// recorded activations; TensorD carries the engine's internal
/// forward/backward chain.
///
/// Invariant: product(shape) == size(). Every extent is positive, except for
/// the default-constructed empty tensor which has rank 0 and no data.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{});
  BasicTensor(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  void fill(T value);
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

TensorD widen(const Tensor& t);
// Rounds every element to the nearest float.
Tensor narrow(const TensorD& t);

// Compares shapes and raw bit patterns (distinguishes -0.0 from 0.0).
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace chanprune
