#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "flowsentinel/cli.hpp"
#include "flowsentinel/dataset_io.hpp"
#include "flowsentinel/model_store.hpp"
#include "test_support.hpp"

namespace flowsentinel {
namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Blob-structured flow file whose labels exercise the default taxonomy.
void write_flow_csv(const std::filesystem::path& path, std::size_t per_class, std::uint64_t seed) {
  const std::vector<std::string> labels{"Benign", "DDoS-TCP", "MQTT-Malformed_Data", "Recon-VulScan"};
  Rng rng(seed);
  Dataset ds;
  const std::size_t f = 12;
  for (std::size_t j = 0; j < f; ++j) ds.feature_names.push_back("feat" + std::to_string(j));
  ds.features = Tensor(Shape{per_class * labels.size(), f});
  for (std::size_t i = 0; i < per_class * labels.size(); ++i) {
    const std::size_t cls = i % labels.size();
    ds.raw_labels.push_back(labels[cls]);
    for (std::size_t j = 0; j < f; ++j) {
      const double centre = (j % labels.size() == cls) ? 6.0 : 0.0;
      ds.features.at(i, j) = 100.0 + 10.0 * (centre + rng.normal());
    }
  }
  write_csv(path, ds, "label");
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Cli, TrainEvaluatePredictInspect) {
  testing::TempDir dir;
  write_flow_csv(dir / "d.csv", 40, 1);
  const std::string model = (dir / "m.bin").string();

  RunResult t = run_cli({"train", "--data", (dir / "d.csv").string(), "--task", "category", "--epochs", "3",
                         "--out", model});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(std::filesystem::exists(model));
  EXPECT_NE(t.out.find("final epoch 3/3 train_loss="), std::string::npos) << t.out;
  EXPECT_NE(t.out.find("macro avg"), std::string::npos);
  EXPECT_NE(t.err.find("epoch 1/3 train_loss="), std::string::npos) << t.err;

  RunResult e = run_cli({"evaluate", "--model", model, "--data", (dir / "d.csv").string(), "--format", "structured"});
  ASSERT_EQ(e.code, 0) << e.err;
  auto doc = nlohmann::json::parse(e.out);
  EXPECT_EQ(doc["class_names"], nlohmann::json({"Benign", "DDoS", "MQTT", "Recon"}));
  EXPECT_EQ(doc["confusion"].size(), 4u);

  const auto report_path = dir / "report.txt";
  e = run_cli({"evaluate", "--model", model, "--data", (dir / "d.csv").string(), "--out", report_path.string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(read_file(report_path).find("confusion matrix"), std::string::npos);

  const auto pred_path = dir / "pred.csv";
  RunResult p = run_cli({"predict", "--model", model, "--data", (dir / "d.csv").string(), "--out", pred_path.string()});
  ASSERT_EQ(p.code, 0) << p.err;
  Dataset pred = load_csv(pred_path, "predicted");
  EXPECT_EQ(pred.samples(), 160u);
  EXPECT_EQ(pred.feature_names,
            (std::vector<std::string>{"prob_Benign", "prob_DDoS", "prob_MQTT", "prob_Recon"}));

  // The probability columns reload exactly as the library computes them.
  ModelBundle b = load_model(model);
  Prediction direct = predict(b.model, b.preproc, load_csv(dir / "d.csv").features);
  EXPECT_EQ(pred.features, direct.probabilities);

  RunResult i = run_cli({"inspect", "--model", model});
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_NE(i.out.find("task: category"), std::string::npos);
  EXPECT_NE(i.out.find("conv1.weights (32, 1, 3)"), std::string::npos) << i.out;
  EXPECT_NE(i.out.find("3 Recon"), std::string::npos);
  EXPECT_NE(i.out.find("epochs=3"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"train"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"train", "--out", "m.bin"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"train", "--data", "d.csv", "--out", "m.bin", "--bogus"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"train", "--data", "d.csv", "--out", "m.bin", "--task", "six"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kSuccess);
}

TEST(Cli, DataErrors) {
  testing::TempDir dir;
  const std::string model = (dir / "m.bin").string();
  EXPECT_EQ(run_cli({"train", "--data", (dir / "nope.csv").string(), "--out", model}).code, cli::kDataError);

  std::ofstream(dir / "bad.csv") << "a,b,label\n1,x,Benign\n";
  RunResult r = run_cli({"train", "--data", (dir / "bad.csv").string(), "--out", model});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("row 1, column b"), std::string::npos) << r.err;

  write_flow_csv(dir / "d.csv", 5, 2);
  std::ofstream(dir / "tax.txt") << "exact,Benign,Benign\n";
  r = run_cli({"train", "--data", (dir / "d.csv").string(), "--taxonomy", (dir / "tax.txt").string(), "--out", model});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("DDoS-TCP"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(model));
}

TEST(Cli, ModelFileErrors) {
  testing::TempDir dir;
  write_flow_csv(dir / "d.csv", 5, 3);
  EXPECT_EQ(run_cli({"evaluate", "--model", (dir / "missing.bin").string(), "--data", (dir / "d.csv").string()}).code,
            cli::kModelFileError);
  EXPECT_EQ(run_cli({"inspect", "--model", (dir / "missing.bin").string()}).code, cli::kModelFileError);
  EXPECT_EQ(run_cli({"train", "--data", (dir / "d.csv").string(), "--epochs", "1", "--out", dir.path().string()}).code,
            cli::kModelFileError);
}

TEST(Cli, LimitPerClassAndCustomTaxonomy) {
  testing::TempDir dir;
  write_flow_csv(dir / "d.csv", 30, 4);
  std::ofstream(dir / "tax.txt") << "# two buckets\nexact,Benign,Benign\ncontains,-,Other\n";
  const std::string model = (dir / "m.bin").string();
  RunResult r = run_cli({"train", "--data", (dir / "d.csv").string(), "--taxonomy", (dir / "tax.txt").string(),
                         "--task", "category", "--limit-per-class", "10", "--epochs", "1", "--out", model});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("kept 40 rows"), std::string::npos) << r.err;
  ModelBundle b = load_model(model);
  EXPECT_EQ(b.preproc.label_map, (std::vector<std::string>{"Benign", "Other"}));
  EXPECT_EQ(b.taxonomy.rules.size(), 2u);
}

}  // namespace
}  // namespace flowsentinel
