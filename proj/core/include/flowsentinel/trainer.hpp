#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flowsentinel/dataset_io.hpp"
#include "flowsentinel/layers.hpp"
#include "flowsentinel/loss_optim.hpp"
#include "flowsentinel/metrics.hpp"
#include "flowsentinel/pipeline.hpp"
#include "flowsentinel/random.hpp"
#include "flowsentinel/tensor.hpp"

namespace flowsentinel {

struct ArchitectureConfig {
  std::size_t feature_count = 0;
  std::size_t class_count = 0;
  std::size_t conv1_filters = 32;
  std::size_t conv2_filters = 64;
  std::size_t kernel_size = 3;
  std::size_t pool_size = 2;
  std::size_t dense_units = 128;

  // Length of the sequence entering the flatten layer (per channel).
  std::size_t pooled_length() const;
  std::size_t flatten_length() const { return pooled_length() * conv2_filters; }
  // Smallest feature count for which pooled_length() >= 1.
  std::size_t min_feature_count() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

inline constexpr std::size_t kParameterTensorCount = 8;

// Names of the parameter tensors in their fixed storage order.
const std::array<std::string, kParameterTensorCount>& parameter_names();

// Conv(32,3) -> ReLU -> Pool(2) -> Conv(64,3) -> ReLU -> Pool(2) -> Flatten
// -> Dense(128) -> ReLU -> Dense(C) -> Softmax.
struct Model {
  ArchitectureConfig arch;
  Conv1D conv1;
  Conv1D conv2;
  Dense dense1;
  Dense output;

  // conv1.weights, conv1.bias, conv2.weights, conv2.bias, dense1.weights,
  // dense1.bias, output.weights, output.bias.
  std::array<Tensor*, kParameterTensorCount> parameters();
  std::array<const Tensor*, kParameterTensorCount> parameters() const;
  std::size_t parameter_count() const;

  friend bool operator==(const Model& a, const Model& b);
};

// Same order as Model::parameters().
using ModelGrads = std::array<Tensor, kParameterTensorCount>;

// Glorot-uniform weights drawn in parameter order, zero biases. Throws
// ConfigError when the feature count is too small for the layer stack.
Model build_model(const ArchitectureConfig& arch, Rng& rng);

// Zero-initialised parameters with the right shapes.
Model make_model_shell(const ArchitectureConfig& arch);

// Pre-softmax output for one (F x 1) sample.
Tensor forward_logits(const Model& model, const Tensor& sample);

struct SampleGradient {
  double loss = 0.0;
  bool correct = false;
  ModelGrads grads;
};

// Loss and full parameter gradient for one (F x 1) sample.
SampleGradient loss_and_gradient(const Model& model, const Tensor& sample, const Tensor& one_hot_target);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;
  // 0 disables early stopping.
  std::size_t early_stop_patience = 0;
  bool shuffle_each_epoch = true;
  // Worker threads for per-sample gradients inside a batch. Results are
  // bit-identical to the sequential path for any value.
  std::size_t threads = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// Standardized features (samples x F x 1) with one-hot targets (samples x C).
struct LabeledSet {
  Tensor features;
  Tensor targets;

  std::size_t samples() const { return features.rank() == 0 ? 0 : features.dim(0); }
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

using EpochCallback = std::function<void(std::size_t epoch, std::size_t total, const EpochStats&)>;

// Mini-batch Adam training. Each epoch reshuffles the training indices,
// averages per-sample gradients over a batch in ascending sample order and
// applies one Adam step per parameter tensor. An empty validation set makes
// the training loss drive best-epoch tracking.
TrainResult train(Model model, const LabeledSet& train_set, const LabeledSet& validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Splits `data` with stratified_split(val_fraction, seed) and trains.
TrainResult train(Model model, const LabeledSet& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

LossAccuracy measure(const Model& model, const LabeledSet& data);

struct Prediction {
  std::vector<std::size_t> classes;
  Tensor probabilities;  // (samples x C)
};

// Standardizes raw (samples x F) features with `preproc`, runs the network
// and returns the argmax class (lowest index on ties) and softmax rows.
Prediction predict(const Model& model, const PreprocState& preproc, const Tensor& raw_features);

// Maps dataset labels to `task`, predicts and scores them. Throws ConfigError
// when the task labels do not fit the model's class map.
EvalReport evaluate(const Model& model, const PreprocState& preproc, const Dataset& dataset,
                    const Taxonomy& taxonomy, Task task);

}  // namespace flowsentinel
