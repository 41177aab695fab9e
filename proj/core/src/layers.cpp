#include "flowsentinel/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowsentinel/error.hpp"

namespace flowsentinel {

std::size_t conv_output_length(std::size_t length, std::size_t kernel_size) {
  return length >= kernel_size ? length - kernel_size + 1 : 0;
}

std::size_t pool_output_length(std::size_t length, std::size_t pool) {
  return pool == 0 ? 0 : length / pool;
}

Conv1D::Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel_size)
    : weights(Shape{filters, in_channels, kernel_size}), bias(Shape{filters}) {}

Conv1D::Conv1D(Tensor w, Tensor b) : weights(std::move(w)), bias(std::move(b)) {
  if (weights.rank() != 3 || bias.rank() != 1 || bias.dim(0) != weights.dim(0)) {
    throw DimensionError("Conv1D: weights " + shape_to_string(weights.shape()) + " and bias " +
                         shape_to_string(bias.shape()) + " are inconsistent");
  }
}

Dense::Dense(std::size_t in, std::size_t out) : weights(Shape{out, in}), bias(Shape{out}) {}

Dense::Dense(Tensor w, Tensor b) : weights(std::move(w)), bias(std::move(b)) {
  if (weights.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weights.dim(0)) {
    throw DimensionError("Dense: weights " + shape_to_string(weights.shape()) + " and bias " +
                         shape_to_string(bias.shape()) + " are inconsistent");
  }
}

namespace {

void check_conv_input(const Conv1D& layer, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != layer.in_channels()) {
    throw DimensionError("conv1d: expected input (length, " + std::to_string(layer.in_channels()) +
                         "), got " + shape_to_string(x.shape()));
  }
  if (x.dim(0) < layer.kernel_size()) {
    throw DimensionError("conv1d: input too short for kernel (length " + std::to_string(x.dim(0)) +
                         " < kernel " + std::to_string(layer.kernel_size()) + ")");
  }
}

}  // namespace

Tensor conv1d_forward(const Conv1D& layer, const Tensor& x) {
  check_conv_input(layer, x);
  const std::size_t filters = layer.filters();
  const std::size_t channels = layer.in_channels();
  const std::size_t kernel = layer.kernel_size();
  const std::size_t out_len = conv_output_length(x.dim(0), kernel);

  Tensor out(Shape{out_len, filters});
  const double* w = layer.weights.data().data();
  const double* in = x.data().data();
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t f = 0; f < filters; ++f) {
      double acc = layer.bias[f];
      const double* wf = w + f * channels * kernel;
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t k = 0; k < kernel; ++k) {
          acc += wf[c * kernel + k] * in[(t + k) * channels + c];
        }
      }
      out.at(t, f) = acc;
    }
  }
  return out;
}

LayerGrads conv1d_backward(const Conv1D& layer, const Tensor& x, const Tensor& grad_out) {
  check_conv_input(layer, x);
  const std::size_t filters = layer.filters();
  const std::size_t channels = layer.in_channels();
  const std::size_t kernel = layer.kernel_size();
  const std::size_t length = x.dim(0);
  const std::size_t out_len = conv_output_length(length, kernel);
  const Shape expected{out_len, filters};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv1d_backward: grad_out " + shape_to_string(grad_out.shape()) +
                         " does not match output shape " + shape_to_string(expected));
  }

  LayerGrads g{Tensor(layer.weights.shape()), Tensor(layer.bias.shape()), Tensor(x.shape())};
  const double* w = layer.weights.data().data();
  const double* in = x.data().data();
  double* dw = g.d_weights.data().data();
  double* dx = g.d_input.data().data();

  for (std::size_t f = 0; f < filters; ++f) {
    double db = 0.0;
    for (std::size_t t = 0; t < out_len; ++t) db += grad_out.at(t, f);
    g.d_bias[f] = db;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t k = 0; k < kernel; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t < out_len; ++t) acc += grad_out.at(t, f) * in[(t + k) * channels + c];
        dw[(f * channels + c) * kernel + k] = acc;
      }
    }
  }

  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t k = 0; k < kernel; ++k) {
          if (k > i || i - k >= out_len) continue;
          acc += w[(f * channels + c) * kernel + k] * grad_out.at(i - k, f);
        }
      }
      dx[i * channels + c] = acc;
    }
  }
  return g;
}

PoolResult maxpool1d_forward(const Tensor& x, std::size_t pool) {
  if (pool == 0) throw DimensionError("maxpool1d: pool size must be positive");
  if (x.rank() != 2) {
    throw DimensionError("maxpool1d: expected (length, channels), got " + shape_to_string(x.shape()));
  }
  if (x.dim(0) < pool) {
    throw DimensionError("maxpool1d: input length " + std::to_string(x.dim(0)) +
                         " shorter than pool size " + std::to_string(pool));
  }
  const std::size_t channels = x.dim(1);
  const std::size_t out_len = pool_output_length(x.dim(0), pool);
  PoolResult r{Tensor(Shape{out_len, channels}), std::vector<std::size_t>(out_len * channels)};
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::size_t best = (t * pool) * channels + c;
      for (std::size_t p = 1; p < pool; ++p) {
        const std::size_t idx = (t * pool + p) * channels + c;
        if (x[idx] > x[best]) best = idx;
      }
      r.output.at(t, c) = x[best];
      r.argmax[t * channels + c] = best;
    }
  }
  return r;
}

Tensor maxpool1d_backward(const std::vector<std::size_t>& argmax, const Tensor& grad_out,
                          const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw DimensionError("maxpool1d_backward: " + std::to_string(argmax.size()) +
                         " argmax entries for grad_out " + shape_to_string(grad_out.shape()));
  }
  Tensor d_input(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= d_input.size()) {
      throw InternalError("maxpool1d_backward: argmax index " + std::to_string(argmax[i]) +
                          " outside input " + shape_to_string(input_shape));
    }
    d_input[argmax[i]] += grad_out[i];
  }
  return d_input;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (x.shape() != grad_out.shape()) {
    throw DimensionError("relu_backward: input " + shape_to_string(x.shape()) + " vs grad " +
                         shape_to_string(grad_out.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return out;
}

Tensor dense_forward(const Dense& layer, const Tensor& x) {
  if (x.rank() != 1 || x.dim(0) != layer.inputs()) {
    throw DimensionError("dense: weights " + shape_to_string(layer.weights.shape()) +
                         " cannot take input " + shape_to_string(x.shape()));
  }
  Tensor y = matvec(layer.weights, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += layer.bias[i];
  return y;
}

LayerGrads dense_backward(const Dense& layer, const Tensor& x, const Tensor& grad_out) {
  if (x.rank() != 1 || x.dim(0) != layer.inputs() || grad_out.rank() != 1 ||
      grad_out.dim(0) != layer.outputs()) {
    throw DimensionError("dense_backward: weights " + shape_to_string(layer.weights.shape()) +
                         ", input " + shape_to_string(x.shape()) + ", grad " +
                         shape_to_string(grad_out.shape()));
  }
  const std::size_t out = layer.outputs();
  const std::size_t in = layer.inputs();
  LayerGrads g{Tensor(layer.weights.shape()), grad_out, {}};
  for (std::size_t i = 0; i < out; ++i) {
    for (std::size_t j = 0; j < in; ++j) g.d_weights.at(i, j) = grad_out[i] * x[j];
  }
  g.d_input = matvec_transposed(layer.weights, grad_out);
  return g;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 || x.size() == 0) {
    throw DimensionError("softmax expects a non-empty vector, got " + shape_to_string(x.shape()));
  }
  const double m = *std::max_element(x.data().begin(), x.data().end());
  Tensor out(x.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    sum += out[i];
  }
  for (double& v : out.data()) v /= sum;
  return out;
}

Tensor flatten(const Tensor& x) {
  return reshape(x, Shape{x.size()});
}

}  // namespace flowsentinel
