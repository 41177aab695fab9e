#include "flowsentinel/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "flowsentinel/dataset_io.hpp"
#include "flowsentinel/error.hpp"
#include "flowsentinel/metrics.hpp"
#include "flowsentinel/model_store.hpp"
#include "flowsentinel/pipeline.hpp"
#include "flowsentinel/trainer.hpp"

namespace flowsentinel::cli {

namespace {

// Anything that went wrong reading or writing a model container.
struct ModelFileFailure {
  std::string message;
};

ModelBundle open_model(const std::string& path) {
  try {
    return load_model(path);
  } catch (const Error& e) {
    throw ModelFileFailure{e.what()};
  }
}

void store_model(const std::string& path, const ModelBundle& bundle) {
  try {
    save_model(path, bundle);
  } catch (const Error& e) {
    throw ModelFileFailure{e.what()};
  }
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string epoch_line(std::size_t epoch, std::size_t total, const EpochStats& s) {
  std::ostringstream line;
  line << "epoch " << epoch << '/' << total << " train_loss=" << fmt("%.6f", s.train_loss)
       << " train_acc=" << fmt("%.4f", s.train_accuracy) << " val_loss=" << fmt("%.6f", s.val_loss)
       << " val_acc=" << fmt("%.4f", s.val_accuracy);
  return line.str();
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write '" + out_path + "'");
  file << text;
  if (!file) throw IoError("failed while writing '" + out_path + "'");
}

struct TrainOptions {
  std::string data;
  std::string task = "multiclass";
  std::string label_column = "label";
  std::string taxonomy;
  std::string out;
  std::optional<std::size_t> limit_per_class;
  TrainConfig config;
};

int run_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  const Task task = parse_task(opt.task);
  const TrainConfig& cfg = opt.config;
  cfg.validate();
  const Taxonomy taxonomy = opt.taxonomy.empty() ? Taxonomy::default_rules() : load_taxonomy(opt.taxonomy);

  Dataset ds = load_csv(opt.data, opt.label_column);
  err << "loaded " << ds.samples() << " rows x " << ds.feature_count() << " features from " << ds.source << '\n';
  if (opt.limit_per_class) {
    ds = subsample_stratified(ds, *opt.limit_per_class, derive_seed(cfg.seed, 2));
    err << "kept " << ds.samples() << " rows after per-class cap " << *opt.limit_per_class << '\n';
  }
  if (ds.samples() == 0) throw ValidationError("'" + opt.data + "' contains no data rows");

  const std::vector<std::string> task_labels = map_labels(ds.raw_labels, taxonomy, task);
  const LabelEncoding enc = encode_labels(task_labels);
  const std::size_t classes = enc.label_map.size();
  const SplitIndices split = stratified_split(enc.class_indices, cfg.val_fraction, cfg.seed);

  const Tensor train_raw = gather_rows(ds.features, split.train);
  PreprocState preproc = fit_standardizer(train_raw);
  preproc.label_map = enc.label_map;
  for (std::size_t j = 0; j < preproc.degenerate.size(); ++j) {
    if (preproc.degenerate[j]) err << "note: feature '" << ds.feature_names[j] << "' is constant on the training split\n";
  }

  auto targets_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> idx;
    idx.reserve(rows.size());
    for (std::size_t r : rows) idx.push_back(enc.class_indices[r]);
    return one_hot_matrix(idx, classes);
  };
  const LabeledSet train_set{apply_standardizer(preproc, train_raw), targets_of(split.train)};
  const LabeledSet val_set{apply_standardizer(preproc, gather_rows(ds.features, split.validation)),
                           targets_of(split.validation)};
  err << "task " << task_name(task) << ": " << classes << " classes, " << train_set.samples() << " train / "
      << val_set.samples() << " validation samples\n";

  ArchitectureConfig arch;
  arch.feature_count = ds.feature_count();
  arch.class_count = classes;
  Rng init_rng(derive_seed(cfg.seed, 0));
  Model model = build_model(arch, init_rng);

  TrainResult result = train(std::move(model), train_set, val_set, cfg,
                             [&](std::size_t epoch, std::size_t total, const EpochStats& s) {
                               err << epoch_line(epoch, total, s) << '\n';
                             });

  ModelBundle bundle;
  bundle.model = std::move(result.model);
  bundle.preproc = std::move(preproc);
  bundle.taxonomy = taxonomy;
  bundle.metadata.task = task;
  bundle.metadata.label_column = opt.label_column;
  bundle.metadata.feature_names = ds.feature_names;
  bundle.metadata.train_config = cfg;
  bundle.metadata.history = result.history;
  store_model(opt.out, bundle);
  err << "model written to " << opt.out << '\n';

  const auto& hist = result.history;
  out << "final " << epoch_line(hist.epochs.size(), cfg.epochs, hist.epochs.back()) << '\n';
  out << "best_epoch=" << hist.best_epoch + 1 << (hist.stopped_early ? " (stopped early)" : "") << '\n';
  if (val_set.samples() > 0) {
    Prediction p = predict(bundle.model, bundle.preproc, gather_rows(ds.features, split.validation));
    std::vector<std::size_t> truth;
    for (std::size_t r : split.validation) truth.push_back(enc.class_indices[r]);
    EvalReport report = classification_report(confusion_matrix(truth, p.classes, classes), enc.label_map);
    out << "\nvalidation report\n" << format_report_text(report);
  }
  return kSuccess;
}

struct EvaluateOptions {
  std::string model;
  std::string data;
  std::string format = "text";
  std::string out;
  std::string task;
  std::string label_column;
};

int run_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  ModelBundle b = open_model(opt.model);
  const Task task = opt.task.empty() ? b.metadata.task : parse_task(opt.task);
  const std::string label_column = opt.label_column.empty() ? b.metadata.label_column : opt.label_column;
  Dataset ds = load_csv(opt.data, label_column);
  err << "evaluating " << ds.samples() << " rows from " << ds.source << " (task " << task_name(task) << ")\n";
  EvalReport report = evaluate(b.model, b.preproc, ds, b.taxonomy, task);
  emit(opt.format == "structured" ? format_report_structured(report) : format_report_text(report), opt.out, out);
  return kSuccess;
}

struct PredictOptions {
  std::string model;
  std::string data;
  std::string out;
  std::string label_column;
};

int run_predict(const PredictOptions& opt, std::ostream& out, std::ostream& err) {
  ModelBundle b = open_model(opt.model);
  const std::string label_column = opt.label_column.empty() ? b.metadata.label_column : opt.label_column;
  Dataset ds = load_csv(opt.data, label_column);
  Prediction p = predict(b.model, b.preproc, ds.features);

  Dataset result;
  result.features = p.probabilities;
  for (const auto& name : b.preproc.label_map) result.feature_names.push_back("prob_" + name);
  for (std::size_t c : p.classes) result.raw_labels.push_back(b.preproc.label_map[c]);
  write_csv(opt.out, result, "predicted");
  err << "wrote " << result.samples() << " predictions to " << opt.out << '\n';
  out << "predicted " << result.samples() << " rows\n";
  return kSuccess;
}

int run_inspect(const std::string& path, std::ostream& out) {
  ModelBundle b = open_model(path);
  const ArchitectureConfig& a = b.model.arch;
  const auto& m = b.metadata;
  out << "task: " << task_name(m.task) << '\n';
  out << "label column: " << m.label_column << '\n';
  out << "architecture: Conv1D(" << a.conv1_filters << ", k=" << a.kernel_size << ") -> ReLU -> MaxPool(" << a.pool_size
      << ") -> Conv1D(" << a.conv2_filters << ", k=" << a.kernel_size << ") -> ReLU -> MaxPool(" << a.pool_size
      << ") -> Flatten(" << a.flatten_length() << ") -> Dense(" << a.dense_units << ") -> ReLU -> Dense("
      << a.class_count << ") -> Softmax\n";
  out << "features: " << a.feature_count << '\n';
  out << "parameters: " << b.model.parameter_count() << '\n';
  const auto params = b.model.parameters();
  for (std::size_t i = 0; i < kParameterTensorCount; ++i) {
    out << "  " << parameter_names()[i] << ' ' << shape_to_string(params[i]->shape()) << '\n';
  }
  out << "classes:\n";
  for (std::size_t c = 0; c < b.preproc.label_map.size(); ++c) out << "  " << c << ' ' << b.preproc.label_map[c] << '\n';
  std::size_t degenerate = std::count(b.preproc.degenerate.begin(), b.preproc.degenerate.end(), true);
  out << "constant features: " << degenerate << '\n';
  const TrainConfig& c = m.train_config;
  out << "training: epochs=" << c.epochs << " batch_size=" << c.batch_size << " lr=" << c.learning_rate
      << " val_split=" << c.val_fraction << " seed=" << c.seed << " early_stop_patience=" << c.early_stop_patience
      << '\n';
  for (std::size_t e = 0; e < m.history.epochs.size(); ++e) {
    out << "  " << epoch_line(e + 1, c.epochs, m.history.epochs[e]) << '\n';
  }
  if (!m.history.epochs.empty()) out << "best_epoch=" << m.history.best_epoch + 1 << '\n';
  out << "taxonomy (" << b.taxonomy.rules.size() << " rules, benign category '" << b.taxonomy.benign_category << "'):\n";
  for (const auto& r : b.taxonomy.rules) {
    out << "  " << match_kind_name(r.kind) << ',' << r.pattern << ',' << r.category << '\n';
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"1D-CNN intrusion classifier for network-flow feature CSVs", "flowsentinel"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a labelled CSV");
  train_cmd->add_option("--data", train_opt.data, "Input CSV with a header row")->required();
  train_cmd->add_option("--task", train_opt.task, "binary | category | multiclass")
      ->check(CLI::IsMember({"binary", "category", "multiclass"}))
      ->capture_default_str();
  train_cmd->add_option("--label-column", train_opt.label_column, "Name of the label column")->capture_default_str();
  train_cmd->add_option("--taxonomy", train_opt.taxonomy, "Rule file mapping raw labels to categories");
  train_cmd->add_option("--epochs", train_opt.config.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", train_opt.config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_opt.config.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--val-split", train_opt.config.val_fraction)
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--seed", train_opt.config.seed)->capture_default_str();
  train_cmd->add_option("--early-stop-patience", train_opt.config.early_stop_patience, "0 disables early stopping")
      ->capture_default_str();
  train_cmd->add_option("--limit-per-class", train_opt.limit_per_class, "Keep at most N rows of each raw class")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--threads", train_opt.config.threads, "Worker threads per batch (results unchanged)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train_opt.out, "Model file to write")->required();

  EvaluateOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model against a labelled CSV");
  eval_cmd->add_option("--model", eval_opt.model)->required();
  eval_cmd->add_option("--data", eval_opt.data)->required();
  eval_cmd->add_option("--format", eval_opt.format, "text | structured")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_opt.out, "Write the report here instead of stdout");
  eval_cmd->add_option("--task", eval_opt.task, "Override the task stored in the model")
      ->check(CLI::IsMember({"binary", "category", "multiclass"}));
  eval_cmd->add_option("--label-column", eval_opt.label_column, "Override the label column stored in the model");

  PredictOptions pred_opt;
  auto* pred_cmd = app.add_subcommand("predict", "Write class probabilities for every row of a CSV");
  pred_cmd->add_option("--model", pred_opt.model)->required();
  pred_cmd->add_option("--data", pred_opt.data)->required();
  pred_cmd->add_option("--out", pred_opt.out, "Output CSV")->required();
  pred_cmd->add_option("--label-column", pred_opt.label_column, "Override the label column stored in the model");

  std::string inspect_model;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a model's architecture and metadata");
  inspect_cmd->add_option("--model", inspect_model)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_opt, out, err);
    if (eval_cmd->parsed()) return run_evaluate(eval_opt, out, err);
    if (pred_cmd->parsed()) return run_predict(pred_opt, out, err);
    if (inspect_cmd->parsed()) return run_inspect(inspect_model, out);
  } catch (const ModelFileFailure& e) {
    err << "error: " << e.message << '\n';
    return kModelFileError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  err << app.help();
  return kUsageError;
}

}  // namespace flowsentinel::cli
