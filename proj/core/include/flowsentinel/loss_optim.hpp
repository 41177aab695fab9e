#pragma once

#include <cstdint>

#include "flowsentinel/random.hpp"
#include "flowsentinel/tensor.hpp"

namespace flowsentinel {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossValue {
  double loss = 0.0;
  // Gradient with respect to the pre-softmax logits.
  Tensor grad;
};

// -log(max(probs[target], 1e-12)). `target` must be one-hot.
double cross_entropy(const Tensor& probs, const Tensor& one_hot_target);

// Softmax followed by cross-entropy; gradient is softmax(logits) - target.
LossValue softmax_ce_grad(const Tensor& logits, const Tensor& one_hot_target);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for one parameter tensor.
struct AdamState {
  AdamConfig config;
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const Shape& shape, AdamConfig config = {});
};

void adam_step(AdamState& state, Tensor& params, const Tensor& grads);

// U(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                           Rng& rng);

}  // namespace flowsentinel
