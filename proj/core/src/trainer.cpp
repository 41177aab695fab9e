#include "flowsentinel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "flowsentinel/error.hpp"

namespace flowsentinel {

std::size_t ArchitectureConfig::pooled_length() const {
  std::size_t len = conv_output_length(feature_count, kernel_size);
  len = pool_output_length(len, pool_size);
  len = conv_output_length(len, kernel_size);
  return pool_output_length(len, pool_size);
}

std::size_t ArchitectureConfig::min_feature_count() const {
  ArchitectureConfig probe = *this;
  for (probe.feature_count = 1;; ++probe.feature_count) {
    if (probe.pooled_length() >= 1) return probe.feature_count;
  }
}

const std::array<std::string, kParameterTensorCount>& parameter_names() {
  static const std::array<std::string, kParameterTensorCount> names = {
      "conv1.weights", "conv1.bias", "conv2.weights", "conv2.bias",
      "dense1.weights", "dense1.bias", "output.weights", "output.bias"};
  return names;
}

std::array<Tensor*, kParameterTensorCount> Model::parameters() {
  return {&conv1.weights, &conv1.bias, &conv2.weights, &conv2.bias,
          &dense1.weights, &dense1.bias, &output.weights, &output.bias};
}

std::array<const Tensor*, kParameterTensorCount> Model::parameters() const {
  return {&conv1.weights, &conv1.bias, &conv2.weights, &conv2.bias,
          &dense1.weights, &dense1.bias, &output.weights, &output.bias};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

bool operator==(const Model& a, const Model& b) {
  if (!(a.arch == b.arch)) return false;
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < kParameterTensorCount; ++i) {
    if (!(*pa[i] == *pb[i])) return false;
  }
  return true;
}

namespace {

void check_architecture(const ArchitectureConfig& arch) {
  if (arch.class_count == 0) throw ConfigError("class count must be at least 1");
  if (arch.kernel_size == 0 || arch.pool_size == 0 || arch.conv1_filters == 0 || arch.conv2_filters == 0 ||
      arch.dense_units == 0) {
    throw ConfigError("layer sizes must be positive");
  }
  if (arch.pooled_length() < 1) {
    throw ConfigError("feature count " + std::to_string(arch.feature_count) +
                      " is too small for the layer stack; at least " +
                      std::to_string(arch.min_feature_count()) + " features are required");
  }
}

}  // namespace

Model make_model_shell(const ArchitectureConfig& arch) {
  check_architecture(arch);
  Model m;
  m.arch = arch;
  m.conv1 = Conv1D(1, arch.conv1_filters, arch.kernel_size);
  m.conv2 = Conv1D(arch.conv1_filters, arch.conv2_filters, arch.kernel_size);
  m.dense1 = Dense(arch.flatten_length(), arch.dense_units);
  m.output = Dense(arch.dense_units, arch.class_count);
  return m;
}

Model build_model(const ArchitectureConfig& arch, Rng& rng) {
  Model m = make_model_shell(arch);
  const std::size_t k = arch.kernel_size;
  m.conv1.weights = glorot_uniform_init(m.conv1.weights.shape(), 1 * k, arch.conv1_filters * k, rng);
  m.conv2.weights =
      glorot_uniform_init(m.conv2.weights.shape(), arch.conv1_filters * k, arch.conv2_filters * k, rng);
  m.dense1.weights = glorot_uniform_init(m.dense1.weights.shape(), arch.flatten_length(), arch.dense_units, rng);
  m.output.weights = glorot_uniform_init(m.output.weights.shape(), arch.dense_units, arch.class_count, rng);
  return m;
}

namespace {

struct ForwardCache {
  Tensor input;
  Tensor conv1_out;
  PoolResult pool1;
  Tensor conv2_in;
  Tensor conv2_out;
  PoolResult pool2;
  Tensor flat;
  Tensor hidden_pre;
  Tensor hidden;
  Tensor logits;
};

ForwardCache run_forward(const Model& model, const Tensor& sample) {
  ForwardCache c;
  c.input = sample.rank() == 1 ? reshape(sample, Shape{sample.size(), 1}) : sample;
  if (c.input.rank() != 2 || c.input.dim(0) != model.arch.feature_count || c.input.dim(1) != 1) {
    throw DimensionError("model expects a (" + std::to_string(model.arch.feature_count) + ", 1) sample, got " +
                         shape_to_string(sample.shape()));
  }
  c.conv1_out = conv1d_forward(model.conv1, c.input);
  c.pool1 = maxpool1d_forward(relu(c.conv1_out), model.arch.pool_size);
  c.conv2_out = conv1d_forward(model.conv2, c.pool1.output);
  c.pool2 = maxpool1d_forward(relu(c.conv2_out), model.arch.pool_size);
  c.flat = flatten(c.pool2.output);
  c.hidden_pre = dense_forward(model.dense1, c.flat);
  c.hidden = relu(c.hidden_pre);
  c.logits = dense_forward(model.output, c.hidden);
  return c;
}

}  // namespace

Tensor forward_logits(const Model& model, const Tensor& sample) {
  return run_forward(model, sample).logits;
}

SampleGradient loss_and_gradient(const Model& model, const Tensor& sample, const Tensor& one_hot_target) {
  ForwardCache c = run_forward(model, sample);
  if (one_hot_target.rank() != 1 || one_hot_target.size() != model.arch.class_count) {
    throw DimensionError("target " + shape_to_string(one_hot_target.shape()) + " does not match " +
                         std::to_string(model.arch.class_count) + " classes");
  }
  LossValue lv = softmax_ce_grad(c.logits, one_hot_target);

  SampleGradient out;
  out.loss = lv.loss;
  out.correct = argmax(c.logits) == argmax(one_hot_target);

  LayerGrads g_out = dense_backward(model.output, c.hidden, lv.grad);
  Tensor d_hidden = relu_backward(c.hidden_pre, g_out.d_input);
  LayerGrads g_dense1 = dense_backward(model.dense1, c.flat, d_hidden);
  Tensor d_pool2 = reshape(g_dense1.d_input, c.pool2.output.shape());
  Tensor d_relu2 = maxpool1d_backward(c.pool2.argmax, d_pool2, c.conv2_out.shape());
  Tensor d_conv2 = relu_backward(c.conv2_out, d_relu2);
  LayerGrads g_conv2 = conv1d_backward(model.conv2, c.pool1.output, d_conv2);
  Tensor d_relu1 = maxpool1d_backward(c.pool1.argmax, g_conv2.d_input, c.conv1_out.shape());
  Tensor d_conv1 = relu_backward(c.conv1_out, d_relu1);
  LayerGrads g_conv1 = conv1d_backward(model.conv1, c.input, d_conv1);

  out.grads = {std::move(g_conv1.d_weights), std::move(g_conv1.d_bias),
               std::move(g_conv2.d_weights), std::move(g_conv2.d_bias),
               std::move(g_dense1.d_weights), std::move(g_dense1.d_bias),
               std::move(g_out.d_weights),    std::move(g_out.d_bias)};
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("validation fraction must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be positive");
  }
  if (threads < 1) throw ValidationError("threads must be at least 1");
}

namespace {

void check_set(const Model& model, const LabeledSet& set, const char* name) {
  const auto& f = set.features.shape();
  const auto& t = set.targets.shape();
  if (f.size() != 3 || f[1] != model.arch.feature_count || f[2] != 1) {
    throw DimensionError(std::string(name) + " features must be (samples, " +
                         std::to_string(model.arch.feature_count) + ", 1), got " + shape_to_string(f));
  }
  if (t.size() != 2 || t[1] != model.arch.class_count) {
    throw DimensionError(std::string(name) + " targets must be (samples, " +
                         std::to_string(model.arch.class_count) + "), got " + shape_to_string(t));
  }
  if (t[0] != f[0]) {
    throw DimensionError(std::string(name) + " has " + std::to_string(f[0]) + " samples but " +
                         std::to_string(t[0]) + " targets");
  }
}

ModelGrads zero_grads(const Model& model) {
  ModelGrads g;
  auto params = model.parameters();
  for (std::size_t i = 0; i < kParameterTensorCount; ++i) g[i] = Tensor(params[i]->shape());
  return g;
}

// Per-sample gradients for one batch, optionally computed on worker threads.
// The caller reduces them in ascending order either way.
std::vector<SampleGradient> batch_gradients(const Model& model, const LabeledSet& set,
                                            std::span<const std::size_t> rows, std::size_t threads) {
  std::vector<SampleGradient> out(rows.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = loss_and_gradient(model, set.features.slice(rows[i]), set.targets.slice(rows[i]));
    }
  };
  const std::size_t workers = std::min(threads, rows.size());
  if (workers <= 1) {
    work(0, rows.size());
    return out;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (rows.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(rows.size(), begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

LossAccuracy measure(const Model& model, const LabeledSet& data) {
  check_set(model, data, "evaluation set");
  const std::size_t n = data.samples();
  if (n == 0) return {};
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor logits = forward_logits(model, data.features.slice(i));
    Tensor target = data.targets.slice(i);
    loss += softmax_ce_grad(logits, target).loss;
    if (argmax(logits) == argmax(target)) ++correct;
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

TrainResult train(Model model, const LabeledSet& train_set, const LabeledSet& validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_set(model, train_set, "training set");
  check_set(model, validation_set, "validation set");
  const std::size_t n = train_set.samples();
  if (n == 0) throw ValidationError("training set is empty");

  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  std::array<AdamState, kParameterTensorCount> optim;
  {
    auto params = model.parameters();
    for (std::size_t i = 0; i < kParameterTensorCount; ++i) optim[i] = AdamState(params[i]->shape(), adam);
  }

  Rng shuffle_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  TrainHistory& history = result.history;
  Model best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  const bool have_validation = validation_set.samples() > 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      std::vector<SampleGradient> per_sample = batch_gradients(model, train_set, rows, config.threads);

      ModelGrads sum = zero_grads(model);
      for (const auto& s : per_sample) {
        loss_sum += s.loss;
        if (s.correct) ++correct;
        for (std::size_t p = 0; p < kParameterTensorCount; ++p) accumulate(sum[p], s.grads[p]);
      }
      const double inv = 1.0 / static_cast<double>(rows.size());
      auto params = model.parameters();
      for (std::size_t p = 0; p < kParameterTensorCount; ++p) {
        scale(sum[p], inv);
        adam_step(optim[p], *params[p], sum[p]);
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (have_validation) {
      LossAccuracy v = measure(model, validation_set);
      stats.val_loss = v.loss;
      stats.val_accuracy = v.accuracy;
    }
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch + 1, config.epochs, stats);

    const double monitored = have_validation ? stats.val_loss : stats.train_loss;
    if (monitored < best_loss) {
      best_loss = monitored;
      history.best_epoch = epoch;
      stale = 0;
      if (config.early_stop_patience > 0) best = model;
    } else {
      ++stale;
    }
    if (config.early_stop_patience > 0 && stale >= config.early_stop_patience) {
      history.stopped_early = epoch + 1 < config.epochs;
      break;
    }
  }

  if (config.early_stop_patience > 0) model = std::move(best);
  result.model = std::move(model);
  return result;
}

TrainResult train(Model model, const LabeledSet& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_set(model, data, "training data");
  if (data.samples() == 0) throw ValidationError("training set is empty");
  std::vector<std::size_t> classes(data.samples());
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = argmax(data.targets.slice(i));
  SplitIndices split = stratified_split(classes, config.val_fraction, config.seed);
  LabeledSet tr{gather_rows(data.features, split.train), gather_rows(data.targets, split.train)};
  LabeledSet va{gather_rows(data.features, split.validation), gather_rows(data.targets, split.validation)};
  return train(std::move(model), tr, va, config, on_epoch);
}

Prediction predict(const Model& model, const PreprocState& preproc, const Tensor& raw_features) {
  if (preproc.feature_count() != model.arch.feature_count) {
    throw ConfigError("preprocessing state has " + std::to_string(preproc.feature_count()) +
                      " features but the model expects " + std::to_string(model.arch.feature_count));
  }
  Tensor x = apply_standardizer(preproc, raw_features);
  const std::size_t n = x.dim(0);
  const std::size_t c = model.arch.class_count;
  Prediction p;
  p.classes.resize(n);
  p.probabilities = Tensor(Shape{n, c});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor probs = softmax(forward_logits(model, x.slice(i)));
    p.classes[i] = argmax(probs);
    for (std::size_t k = 0; k < c; ++k) p.probabilities.at(i, k) = probs[k];
  }
  return p;
}

EvalReport evaluate(const Model& model, const PreprocState& preproc, const Dataset& dataset,
                    const Taxonomy& taxonomy, Task task) {
  if (dataset.samples() == 0) throw ValidationError("evaluation set is empty");
  if (preproc.label_map.size() != model.arch.class_count) {
    throw ConfigError("model has " + std::to_string(model.arch.class_count) + " outputs but its class map lists " +
                      std::to_string(preproc.label_map.size()) + " classes");
  }
  for (const auto& name : preproc.label_map) {
    bool fits = false;
    switch (task) {
      case Task::kBinary: fits = name == "Benign" || name == "Attack"; break;
      case Task::kCategory:
        fits = std::any_of(taxonomy.rules.begin(), taxonomy.rules.end(),
                           [&](const TaxonomyRule& r) { return r.category == name; });
        break;
      case Task::kMulticlass: fits = taxonomy.try_category(name).has_value(); break;
    }
    if (!fits) {
      throw ConfigError("model class '" + name + "' is not a label of task '" + std::string(task_name(task)) + "'");
    }
  }
  std::vector<std::string> labels = map_labels(dataset.raw_labels, taxonomy, task);
  std::vector<std::size_t> truth;
  try {
    truth = lookup_labels(preproc.label_map, labels);
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("task '") + std::string(task_name(task)) +
                      "' does not match the model's classes: " + e.what());
  }
  Prediction p = predict(model, preproc, dataset.features);
  return classification_report(confusion_matrix(truth, p.classes, model.arch.class_count), preproc.label_map);
}

}  // namespace flowsentinel
