// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowsentinel/cli.hpp"
#include "flowsentinel/dataset_io.hpp"
#include "flowsentinel/error.hpp"
#include "flowsentinel/layers.hpp"
#include "flowsentinel/loss_optim.hpp"
#include "flowsentinel/metrics.hpp"
#include "flowsentinel/model_store.hpp"
#include "flowsentinel/pipeline.hpp"
#include "flowsentinel/trainer.hpp"
#include "test_support.hpp"

namespace fs = flowsentinel;
using fs::Rng;
using fs::Shape;
using fs::Tensor;
using fs::testing::numeric_gradient;
using fs::testing::random_tensor;
using fs::testing::relative_error;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

enum class Status { kPass, kFail, kSkip };

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1. Per-layer and end-to-end gradient checks.
void gradient_checks(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  double worst_layer = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    {
      fs::Conv1D layer(random_tensor(Shape{3, 2, 3}, rng), random_tensor(Shape{3}, rng));
      Tensor x = random_tensor(Shape{8, 2}, rng);
      Tensor r = random_tensor(Shape{6, 3}, rng);
      fs::LayerGrads g = fs::conv1d_backward(layer, x, r);
      auto f = [&] { return fs::testing::dot(r, fs::conv1d_forward(layer, x)); };
      worst_layer = std::max({worst_layer, relative_error(g.d_weights, numeric_gradient(layer.weights, f)),
                              relative_error(g.d_bias, numeric_gradient(layer.bias, f)),
                              relative_error(g.d_input, numeric_gradient(x, f))});
    }
    {
      Tensor x = random_tensor(Shape{11, 3}, rng);
      Tensor r = random_tensor(Shape{5, 3}, rng);
      fs::PoolResult p = fs::maxpool1d_forward(x);
      Tensor d = fs::maxpool1d_backward(p.argmax, r, x.shape());
      auto f = [&] { return fs::testing::dot(r, fs::maxpool1d_forward(x).output); };
      worst_layer = std::max(worst_layer, relative_error(d, numeric_gradient(x, f)));
    }
    {
      Tensor x = random_tensor(Shape{7, 4}, rng);
      Tensor r = random_tensor(Shape{7, 4}, rng);
      auto f = [&] { return fs::testing::dot(r, fs::relu(x)); };
      worst_layer = std::max(worst_layer, relative_error(fs::relu_backward(x, r), numeric_gradient(x, f)));
    }
    {
      fs::Dense layer(random_tensor(Shape{5, 7}, rng), random_tensor(Shape{5}, rng));
      Tensor x = random_tensor(Shape{7}, rng);
      Tensor r = random_tensor(Shape{5}, rng);
      fs::LayerGrads g = fs::dense_backward(layer, x, r);
      auto f = [&] { return fs::testing::dot(r, fs::dense_forward(layer, x)); };
      worst_layer = std::max({worst_layer, relative_error(g.d_weights, numeric_gradient(layer.weights, f)),
                              relative_error(g.d_bias, numeric_gradient(layer.bias, f)),
                              relative_error(g.d_input, numeric_gradient(x, f))});
    }
    {
      Tensor logits = random_tensor(Shape{5}, rng, -3, 3);
      Tensor y(Shape{5});
      y[rng.below(5)] = 1.0;
      fs::LossValue v = fs::softmax_ce_grad(logits, y);
      auto f = [&] { return fs::cross_entropy(fs::softmax(logits), y); };
      worst_layer = std::max(worst_layer, relative_error(v.grad, numeric_gradient(logits, f)));
    }
  }

  double worst_model = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(2000 + seed);
    fs::ArchitectureConfig arch;
    arch.feature_count = 12;
    arch.class_count = 3;
    fs::Model model = fs::build_model(arch, rng);
    for (Tensor* p : model.parameters()) {
      if (p->rank() == 1) *p = random_tensor(p->shape(), rng, -0.1, 0.1);
    }
    Tensor x = random_tensor(Shape{12, 1}, rng, -2, 2);
    Tensor y(Shape{3});
    y[rng.below(3)] = 1.0;
    fs::SampleGradient g = fs::loss_and_gradient(model, x, y);
    auto params = model.parameters();
    for (std::size_t i = 0; i < fs::kParameterTensorCount; ++i) {
      Tensor n = numeric_gradient(*params[i], [&] { return fs::cross_entropy(fs::softmax(fs::forward_logits(model, x)), y); });
      worst_model = std::max(worst_model, relative_error(g.grads[i], n));
    }
  }
  const double elapsed = seconds_since(start);
  o.detail << "worst layer rel err " << worst_layer << ", worst model rel err " << worst_model << ", " << elapsed << " s";
  o.require(worst_layer < 1e-6, "layer rel err < 1e-6");
  o.require(worst_model < 1e-5, "model rel err < 1e-5");
  o.require(elapsed < 30.0, "runtime < 30 s");
}

// 2. Convolution against the brute-force loop.
void convolution_oracle(Outcome& o) {
  Rng rng(3);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 3 + rng.below(30);
    const std::size_t ch = 1 + rng.below(4);
    const std::size_t filters = 1 + rng.below(8);
    const std::size_t kernel = 3;
    fs::Conv1D layer(random_tensor(Shape{filters, ch, kernel}, rng), random_tensor(Shape{filters}, rng));
    Tensor x = random_tensor(Shape{len, ch}, rng, -10, 10);
    auto expected = fs::testing::brute_force_conv1d(x.values(), len, ch, layer.weights.values(), layer.bias.values(),
                                                    filters, kernel);
    if (fs::conv1d_forward(layer, x).values() != expected) ++mismatches;
  }
  o.detail << mismatches << "/100 shapes differ";
  o.require(mismatches == 0, "bit-equal on all shapes");
}

// 3. Metrics on the fixed example.
void metrics_oracle(Outcome& o) {
  fs::ConfusionMatrix m = fs::confusion_matrix({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  fs::EvalReport r = fs::classification_report(m, {"0", "1"});
  const double expected_macro_f1 = (2.0 / 3.0 + 0.8) / 2.0;
  o.detail << "accuracy " << r.accuracy << ", macro F1 " << r.macro.f1;
  o.require(m == fs::ConfusionMatrix::from_rows({{1, 1}, {0, 2}}), "confusion [[1,1],[0,2]]");
  o.require(std::abs(r.accuracy - 0.75) <= 1e-12, "accuracy 0.75");
  o.require(std::abs(r.macro.f1 - expected_macro_f1) <= 1e-12, "macro F1 0.7333...");
}

// 4. Shape chain.
void shape_chain(Outcome& o) {
  Rng rng(4);
  fs::ArchitectureConfig arch;
  arch.feature_count = 16;
  arch.class_count = 3;
  fs::Model m = fs::build_model(arch, rng);
  o.detail << "flatten " << arch.flatten_length() << ", output weights " << fs::shape_to_string(m.output.weights.shape());
  o.require(arch.flatten_length() == 128, "flatten length 128");
  o.require(m.output.weights.shape() == Shape{3, 128}, "output weights 3x128");
  bool rejected = false;
  arch.feature_count = 7;
  try {
    fs::build_model(arch, rng);
  } catch (const fs::ConfigError&) {
    rejected = true;
  }
  o.require(rejected, "F=7 rejected");
}

fs::LabeledSet empty_set(std::size_t f, std::size_t c) {
  return {Tensor(Shape{0, f, 1}), Tensor(Shape{0, c})};
}

// 5. Memorization and separable blobs.
void learning_sanity(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  fs::ArchitectureConfig arch;
  arch.feature_count = 16;
  arch.class_count = 3;

  // 32 samples, random labels.
  Rng data_rng(50);
  fs::LabeledSet mem{Tensor(Shape{32, 16, 1}), Tensor(Shape{32, 3})};
  for (double& v : mem.features.data()) v = data_rng.normal();
  for (std::size_t i = 0; i < 32; ++i) mem.targets.at(i, data_rng.below(3)) = 1.0;
  fs::TrainConfig mem_cfg;
  mem_cfg.epochs = 300;
  mem_cfg.learning_rate = 0.01;
  Rng init(51);
  fs::TrainResult mem_result = fs::train(fs::build_model(arch, init), mem, empty_set(16, 3), mem_cfg);
  const double mem_acc = fs::measure(mem_result.model, mem).accuracy;

  // 300 train / 60 validation blobs, paper defaults (10 epochs, batch 32).
  fs::testing::Blobs blobs = fs::testing::make_blobs(120, 16, 52);
  std::vector<std::size_t> tr_rows, va_rows;
  for (std::size_t i = 0; i < 360; ++i) (i < 300 ? tr_rows : va_rows).push_back(i);
  fs::PreprocState pre = fs::fit_standardizer(fs::gather_rows(blobs.features, tr_rows));
  auto labels_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> l;
    for (auto r : rows) l.push_back(blobs.labels[r]);
    return fs::one_hot_matrix(l, 3);
  };
  fs::LabeledSet tr{fs::apply_standardizer(pre, fs::gather_rows(blobs.features, tr_rows)), labels_of(tr_rows)};
  fs::LabeledSet va{fs::apply_standardizer(pre, fs::gather_rows(blobs.features, va_rows)), labels_of(va_rows)};
  fs::TrainConfig blob_cfg;
  Rng init2(53);
  fs::TrainResult blob_result = fs::train(fs::build_model(arch, init2), tr, va, blob_cfg);
  const double val_acc = blob_result.history.epochs.back().val_accuracy;

  const double elapsed = seconds_since(start);
  o.detail << "memorization train acc " << mem_acc << ", blobs val acc " << val_acc << ", " << elapsed << " s";
  o.require(mem_acc == 1.0, "memorization train accuracy 1.0");
  o.require(val_acc >= 0.95, "blobs validation accuracy >= 0.95");
  o.require(elapsed < 60.0, "runtime < 60 s");
}

struct CliRun {
  int code;
  std::string out;
};

CliRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = fs::cli::run(args, out, err);
  return {code, out.str()};
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_blob_csv(const std::filesystem::path& path) {
  fs::testing::Blobs blobs = fs::testing::make_blobs(40, 16, 60);
  const std::vector<std::string> names{"Benign", "DDoS-TCP", "Recon-VulScan"};
  fs::Dataset ds;
  ds.features = blobs.features;
  for (auto l : blobs.labels) ds.raw_labels.push_back(names[l]);
  for (int j = 0; j < 16; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  fs::write_csv(path, ds);
}

// 6. Reproducible CLI runs.
void determinism(Outcome& o) {
  fs::testing::TempDir dir;
  write_blob_csv(dir / "d.csv");
  auto train_to = [&](const std::string& name) {
    return run_cli({"train", "--data", (dir / "d.csv").string(), "--task", "multiclass", "--seed", "7", "--epochs", "4",
                    "--out", (dir / name).string()});
  };
  CliRun a = train_to("a.bin");
  CliRun b = train_to("b.bin");
  const bool same_file = read_bytes(dir / "a.bin") == read_bytes(dir / "b.bin");
  o.detail << "exit codes " << a.code << "/" << b.code << ", model files " << (same_file ? "identical" : "differ")
           << ", stdout " << (a.out == b.out ? "identical" : "differs");
  o.require(a.code == 0 && b.code == 0, "both runs succeed");
  o.require(same_file, "byte-identical model files");
  o.require(a.out == b.out && !a.out.empty(), "identical metric lines");
}

// 7. Serialization round trip and corrupted files.
void serialization(Outcome& o) {
  fs::testing::TempDir dir;
  write_blob_csv(dir / "d.csv");
  const auto model_path = dir / "m.bin";
  CliRun t = run_cli({"train", "--data", (dir / "d.csv").string(), "--epochs", "2", "--out", model_path.string()});
  o.require(t.code == 0, "training run succeeds");
  if (t.code != 0) return;

  fs::ModelBundle b = fs::load_model(model_path);
  fs::save_model(dir / "copy.bin", b);
  fs::ModelBundle c = fs::load_model(dir / "copy.bin");
  fs::Dataset ds = fs::load_csv(dir / "d.csv");
  fs::Prediction p1 = fs::predict(b.model, b.preproc, ds.features);
  fs::Prediction p2 = fs::predict(c.model, c.preproc, ds.features);
  o.require(p1.classes == p2.classes && p1.probabilities == p2.probabilities, "predictions bit-identical after reload");
  o.require(read_bytes(model_path) == read_bytes(dir / "copy.bin"), "re-serialization byte-identical");

  std::vector<char> bytes = read_bytes(model_path);
  std::vector<char> bad_magic = bytes;
  std::copy_n("XXXX", 4, bad_magic.begin());
  std::ofstream(dir / "magic.bin", std::ios::binary).write(bad_magic.data(), static_cast<std::streamsize>(bad_magic.size()));
  std::ofstream(dir / "trunc.bin", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));

  const int magic_code = run_cli({"evaluate", "--model", (dir / "magic.bin").string(), "--data", (dir / "d.csv").string()}).code;
  const int trunc_code = run_cli({"evaluate", "--model", (dir / "trunc.bin").string(), "--data", (dir / "d.csv").string()}).code;
  o.detail << "bad magic exit " << magic_code << ", truncated exit " << trunc_code;
  o.require(magic_code == 3, "bad magic exits 3");
  o.require(trunc_code == 3, "truncated file exits 3");
}

// 8. Standardization statistics.
void preprocessing(Outcome& o) {
  Rng rng(80);
  const std::size_t n = 500, f = 10;
  Tensor x(Shape{n, f});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      x.at(i, j) = (j == 3) ? 42.0 : 1e4 * static_cast<double>(j) + rng.normal() * std::pow(10.0, static_cast<double>(j % 5));
    }
  }
  fs::PreprocState s;
  Tensor z;
  try {
    s = fs::fit_standardizer(x);
    z = fs::apply_standardizer(s, x);
  } catch (const fs::Error& e) {
    o.require(false, std::string("standardizer threw: ") + e.what());
    return;
  }
  double worst_mean = 0.0, worst_std = 0.0;
  for (std::size_t j = 0; j < f; ++j) {
    if (s.degenerate[j]) continue;
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += z.at(i, j, 0);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (z.at(i, j, 0) - mean) * (z.at(i, j, 0) - mean);
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_std = std::max(worst_std, std::abs(std::sqrt(sq / static_cast<double>(n)) - 1.0));
  }
  bool constant_ok = s.degenerate[3] && s.stds[3] == 1.0;
  for (std::size_t i = 0; i < n; ++i) constant_ok = constant_ok && z.at(i, 3, 0) == 0.0;
  o.detail << "max |mean| " << worst_mean << ", max |std-1| " << worst_std;
  o.require(worst_mean < 1e-9, "|mean| < 1e-9");
  o.require(worst_std < 1e-9, "|std-1| < 1e-9");
  o.require(constant_ok, "constant column guarded");
}

// 9. Default taxonomy on the six representative labels.
void taxonomy(Outcome& o) {
  const std::vector<std::string> labels{"Benign", "DDoS-TCP", "DoS-SYN", "MQTT-Malformed_Data", "Recon-VulScan",
                                        "ARP_Spoofing"};
  const fs::Taxonomy t = fs::Taxonomy::default_rules();
  auto cat = fs::map_labels(labels, t, fs::Task::kCategory);
  auto bin = fs::map_labels(labels, t, fs::Task::kBinary);
  std::set<std::string> cats(cat.begin(), cat.end()), bins(bin.begin(), bin.end());
  o.detail << cats.size() << " categories, " << bins.size() << " binary labels";
  o.require(cats == std::set<std::string>{"Benign", "DDoS", "DoS", "MQTT", "Recon", "Spoofing"}, "six categories");
  o.require(bins == std::set<std::string>{"Benign", "Attack"}, "binary {Benign, Attack}");
}

// 10. Optional full-dataset run, enabled by pointing the environment at
// CICIoMT2024 train/test CSVs with a label column.
Status full_dataset(Outcome& o) {
  const char* train_csv = std::getenv("FLOWSENTINEL_CICIOMT_TRAIN");
  const char* test_csv = std::getenv("FLOWSENTINEL_CICIOMT_TEST");
  if (!train_csv || !test_csv) {
    o.detail << "set FLOWSENTINEL_CICIOMT_TRAIN and FLOWSENTINEL_CICIOMT_TEST to run";
    return Status::kSkip;
  }
  fs::testing::TempDir dir;
  auto run_task = [&](const std::string& task) -> const fs::EvalReport {
    const auto model = (dir / (task + ".bin")).string();
    CliRun t = run_cli({"train", "--data", train_csv, "--task", task, "--out", model});
    if (t.code != 0) throw fs::Error("training " + task + " failed with exit " + std::to_string(t.code));
    fs::ModelBundle b = fs::load_model(model);
    return fs::evaluate(b.model, b.preproc, fs::load_csv(test_csv, b.metadata.label_column), b.taxonomy, b.metadata.task);
  };
  try {
    fs::EvalReport binary = run_task("binary");
    fs::EvalReport multi = run_task("multiclass");
    o.detail << "binary accuracy " << binary.accuracy << ", 19-class macro F1 " << multi.macro.f1;
    o.require(binary.accuracy >= 0.98, "binary accuracy >= 0.98");
    o.require(std::abs(multi.macro.f1 - 0.98) <= 0.05, "19-class macro F1 within 0.05 of 0.98");
  } catch (const fs::Error& e) {
    o.require(false, e.what());
  }
  return o.pass ? Status::kPass : Status::kFail;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Status(Outcome&)> check;
  };
  auto plain = [](void (*fn)(Outcome&)) {
    return [fn](Outcome& o) {
      fn(o);
      return o.pass ? Status::kPass : Status::kFail;
    };
  };
  const std::vector<Criterion> criteria{
      {"AC1 gradient checks", plain(gradient_checks)},
      {"AC2 convolution oracle", plain(convolution_oracle)},
      {"AC3 metrics oracle", plain(metrics_oracle)},
      {"AC4 shape chain", plain(shape_chain)},
      {"AC5 memorization and blobs", plain(learning_sanity)},
      {"AC6 determinism", plain(determinism)},
      {"AC7 serialization", plain(serialization)},
      {"AC8 preprocessing", plain(preprocessing)},
      {"AC9 taxonomy", plain(taxonomy)},
      {"AC10 full dataset (optional)", full_dataset},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    Status s;
    try {
      s = c.check(o);
    } catch (const std::exception& e) {
      o.detail << " [exception: " << e.what() << "]";
      s = Status::kFail;
    }
    const char* tag = s == Status::kPass ? "PASS" : s == Status::kSkip ? "SKIP" : "FAIL";
    if (s == Status::kFail) ++failures;
    std::cout << tag << "  " << c.name << ": " << o.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
