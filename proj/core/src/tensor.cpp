#include "flowsentinel/tensor.hpp"

#include <cmath>
#include <sstream>

#include "flowsentinel/error.hpp"

namespace flowsentinel {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  if (shape.size() == 1) out << ',';
  out << ')';
  return out.str();
}

namespace {

void check_rank(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1..3, got shape " + shape_to_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_rank(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data));
}

void Tensor::fill(double value) {
  for (double& x : data_) x = value;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Tensor Tensor::slice(std::size_t index) const {
  if (index >= shape_[0]) {
    throw DimensionError("slice index " + std::to_string(index) + " out of range for shape " +
                         shape_to_string(shape_));
  }
  Shape inner(shape_.begin() + 1, shape_.end());
  if (inner.empty()) inner.push_back(1);
  const std::size_t stride = shape_size(inner);
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(index * stride);
  return Tensor(std::move(inner), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
    throw DimensionError("matvec: cannot multiply " + shape_to_string(w.shape()) + " by " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  Tensor out(Shape{rows});
  const double* wp = w.data().data();
  const double* xp = x.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = wp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * xp[j];
    out[i] = acc;
  }
  return out;
}

Tensor matvec_transposed(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(0) != x.dim(0)) {
    throw DimensionError("matvec_transposed: cannot multiply transpose of " +
                         shape_to_string(w.shape()) + " by " + shape_to_string(x.shape()));
  }
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  Tensor out(Shape{cols});
  const double* wp = w.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    const double* row = wp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * xi;
  }
  return out;
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (shape_size(new_shape) != t.size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(t.shape()) + " as " +
                         shape_to_string(new_shape));
  }
  return Tensor(std::move(new_shape), t.values());
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
  require_same_shape(a, b, "elementwise");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (op) {
      case ElementwiseOp::kAdd: out[i] = a[i] + b[i]; break;
      case ElementwiseOp::kSub: out[i] = a[i] - b[i]; break;
      case ElementwiseOp::kMul: out[i] = a[i] * b[i]; break;
    }
  }
  return out;
}

void accumulate(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "accumulate");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void scale(Tensor& a, double factor) {
  for (double& x : a.data()) x *= factor;
}

std::size_t argmax(const Tensor& t) {
  if (t.rank() != 1 || t.size() == 0) {
    throw DimensionError("argmax expects a non-empty vector, got " + shape_to_string(t.shape()));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

}  // namespace flowsentinel
