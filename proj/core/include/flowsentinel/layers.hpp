#pragma once

#include <cstddef>
#include <vector>

#include "flowsentinel/tensor.hpp"

namespace flowsentinel {

// Valid (unpadded), stride-1 cross-correlation over a (length x channels)
// input. weights: (filters x in_channels x kernel_size), bias: (filters).
struct Conv1D {
  Tensor weights;
  Tensor bias;

  Conv1D() = default;
  Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel_size);
  Conv1D(Tensor weights, Tensor bias);

  std::size_t filters() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel_size() const { return weights.dim(2); }
};

// y = W x + b with W: (out x in), b: (out).
struct Dense {
  Tensor weights;
  Tensor bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out);
  Dense(Tensor weights, Tensor bias);

  std::size_t inputs() const { return weights.dim(1); }
  std::size_t outputs() const { return weights.dim(0); }
};

// Gradients of a scalar objective with respect to a layer's parameters and
// input. Shapes mirror the forward-pass counterparts.
struct LayerGrads {
  Tensor d_weights;
  Tensor d_bias;
  Tensor d_input;
};

struct PoolResult {
  Tensor output;
  // Flat input position that won each output cell.
  std::vector<std::size_t> argmax;
};

Tensor conv1d_forward(const Conv1D& layer, const Tensor& x);
LayerGrads conv1d_backward(const Conv1D& layer, const Tensor& x, const Tensor& grad_out);

// Non-overlapping max pooling along the length axis of a (length x channels)
// tensor. A trailing remainder shorter than `pool` is dropped; ties go to the
// first position.
PoolResult maxpool1d_forward(const Tensor& x, std::size_t pool = 2);
Tensor maxpool1d_backward(const std::vector<std::size_t>& argmax, const Tensor& grad_out,
                          const Shape& input_shape);

Tensor relu(const Tensor& x);
// Derivative at exactly 0 is taken as 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor dense_forward(const Dense& layer, const Tensor& x);
LayerGrads dense_backward(const Dense& layer, const Tensor& x, const Tensor& grad_out);

// Max-subtracted softmax of a rank-1 tensor.
Tensor softmax(const Tensor& x);

Tensor flatten(const Tensor& x);

// Output length of a valid stride-1 convolution, 0 when the input is too short.
std::size_t conv_output_length(std::size_t length, std::size_t kernel_size);
std::size_t pool_output_length(std::size_t length, std::size_t pool);

}  // namespace flowsentinel
