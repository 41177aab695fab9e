#include "flowsentinel/loss_optim.hpp"

#include <algorithm>
#include <cmath>

#include "flowsentinel/error.hpp"
#include "flowsentinel/layers.hpp"

namespace flowsentinel {

namespace {

std::size_t one_hot_index(const Tensor& target) {
  std::size_t hot = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      if (hot != target.size()) throw ValidationError("target has more than one hot entry");
      hot = i;
    } else if (target[i] != 0.0) {
      throw ValidationError("target entries must be 0 or 1, found " + std::to_string(target[i]));
    }
  }
  if (hot == target.size()) throw ValidationError("target has no hot entry");
  return hot;
}

void check_pair(const Tensor& a, const Tensor& target, const char* what) {
  if (a.rank() != 1 || target.rank() != 1 || a.size() != target.size()) {
    throw DimensionError(std::string(what) + ": " + shape_to_string(a.shape()) + " vs target " +
                         shape_to_string(target.shape()));
  }
}

}  // namespace

double cross_entropy(const Tensor& probs, const Tensor& one_hot_target) {
  check_pair(probs, one_hot_target, "cross_entropy");
  const std::size_t k = one_hot_index(one_hot_target);
  return -std::log(std::max(probs[k], kProbabilityFloor));
}

LossValue softmax_ce_grad(const Tensor& logits, const Tensor& one_hot_target) {
  check_pair(logits, one_hot_target, "softmax_ce_grad");
  Tensor probs = softmax(logits);
  LossValue v;
  v.loss = cross_entropy(probs, one_hot_target);
  v.grad = elementwise(probs, one_hot_target, ElementwiseOp::kSub);
  return v;
}

AdamState::AdamState(const Shape& shape, AdamConfig cfg) : config(cfg), m(shape), v(shape) {}

void adam_step(AdamState& state, Tensor& params, const Tensor& grads) {
  if (params.shape() != grads.shape() || state.m.shape() != params.shape() ||
      state.v.shape() != params.shape()) {
    throw DimensionError("adam_step: params " + shape_to_string(params.shape()) + ", grads " +
                         shape_to_string(grads.shape()) + ", moments " +
                         shape_to_string(state.m.shape()));
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

Tensor glorot_uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ValidationError("glorot_uniform_init: fans must be positive");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(shape);
  for (double& x : t.data()) x = rng.uniform(-limit, limit);
  return t;
}

}  // namespace flowsentinel
