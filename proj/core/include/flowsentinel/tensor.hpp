#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace flowsentinel {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor of doubles, rank 1 to 3.
//
// The flat buffer always holds exactly shape_size(shape()) elements. Extents
// may be zero (an empty batch), in which case the buffer is empty.
class Tensor {
 public:
  Tensor() : Tensor(Shape{0}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double value);
  bool all_finite() const;

  // Copy of the leading-axis slice `index`, e.g. one sample of a batch.
  Tensor slice(std::size_t index) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class ElementwiseOp { kAdd, kSub, kMul };

// out[i] = sum_j w[i, j] * x[j], summed in ascending j.
Tensor matvec(const Tensor& w, const Tensor& x);

// out[j] = sum_i w[i, j] * x[i], summed in ascending i.
Tensor matvec_transposed(const Tensor& w, const Tensor& x);

// Same data, new shape. Throws DimensionError if the element counts differ.
Tensor reshape(const Tensor& t, Shape new_shape);

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);

// a += b in place; shapes must match.
void accumulate(Tensor& a, const Tensor& b);
void scale(Tensor& a, double factor);

// Index of the largest element of a rank-1 tensor, lowest index on ties.
std::size_t argmax(const Tensor& t);

}  // namespace flowsentinel
