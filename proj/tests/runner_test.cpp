#include "attrbias/runner.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "attrbias/error.hpp"
#include "attrbias/records.hpp"
#include "attrbias/report.hpp"

namespace attrbias {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every file under `root`, relative path -> contents.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("attrbias-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c = default_experiment();
  c.datasets = {std::string(kUniquePunctuation)};
  c.model_configs.resize(1);
  c.model_configs[0].base.hyperparams.epochs = 1;
  c.seeds = {0, 1};
  c.methods = {Method::kVanGrad, Method::kGradXInput};
  c.test_limit = 12;
  c.threads = 2;
  c.output_dir = out.string();
  return c;
}

TEST(Config, JsonRoundTrip) {
  auto c = default_experiment();
  c.attribution.ranking = TopkRanking::kAbsolute;
  c.attribution.lime.kernel_width = 0.7;
  c.faithfulness.corruption = CorruptionMode::kMask;
  c.causal.corpus_path = "corpus.jsonl";
  c.model_configs[1].base.activation = Activation::kIdentity;
  const auto j = experiment_to_json(c);
  const auto back = experiment_from_json(j);
  EXPECT_EQ(experiment_to_json(back), j);
  EXPECT_EQ(back.model_configs[1].base, c.model_configs[1].base);
  EXPECT_EQ(back.methods, c.methods);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = experiment_to_json(default_experiment());
  j["sedes"] = {1};
  EXPECT_THROW(experiment_from_json(j), UsageError);
  j = experiment_to_json(default_experiment());
  j["attribution"]["ig_stepz"] = 3;
  EXPECT_THROW(experiment_from_json(j), UsageError);
  j = experiment_to_json(default_experiment());
  j["seeds"] = {1, 1};
  EXPECT_THROW(experiment_from_json(j), UsageError);
  j = experiment_to_json(default_experiment());
  j["methods"] = {"SHAP"};
  EXPECT_THROW(experiment_from_json(j), UsageError);
  j = experiment_to_json(default_experiment());
  j["datasets"] = {"imdb"};
  EXPECT_THROW(experiment_from_json(j), UsageError);
  j = experiment_to_json(default_experiment());
  j["k"] = 0;
  EXPECT_THROW(experiment_from_json(j), UsageError);
}

TEST(Config, OutputRootFromEnvironment) {
  ::setenv(kOutputRootEnv, "/tmp/root", 1);
  EXPECT_EQ(resolve_output_dir("out"), "/tmp/root/out");
  EXPECT_EQ(resolve_output_dir("/abs/out"), "/abs/out");
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(resolve_output_dir("out"), "out");
}

TEST(Runner, CachesAndRecomputesOnlyMissingCells) {
  TempDir tmp;
  const auto config = small_config(tmp.path() / "out");
  const auto first = run_experiment(config);
  EXPECT_EQ(first.exit_code(), 0);
  EXPECT_EQ(first.datasets_generated, 1);
  EXPECT_EQ(first.models_trained, 2);
  EXPECT_EQ(first.record_files_computed, 4);
  const auto before = snapshot(tmp.path() / "out");
  EXPECT_TRUE(before.count("report/bias_report.csv"));
  EXPECT_TRUE(before.count("report/table_token_position.csv"));
  EXPECT_TRUE(before.count("report/faithfulness.csv"));

  const auto second = run_experiment(config);
  EXPECT_EQ(second.datasets_cached, 1);
  EXPECT_EQ(second.models_cached, 2);
  EXPECT_EQ(second.record_files_cached, 4);
  EXPECT_EQ(second.record_files_computed, 0);
  EXPECT_EQ(snapshot(tmp.path() / "out"), before);

  const ArtifactLayout layout(config.output_dir);
  fs::remove(layout.records(config.model_configs[0].name, config.datasets[0], 1, Method::kVanGrad));
  const auto third = run_experiment(config);
  EXPECT_EQ(third.record_files_computed, 1);
  EXPECT_EQ(third.record_files_cached, 3);
  EXPECT_EQ(snapshot(tmp.path() / "out"), before);
}

TEST(Runner, MissingModelIsLoggedAndOtherCellsContinue) {
  TempDir tmp;
  auto config = small_config(tmp.path() / "out");
  config.faithfulness_enabled = false;
  ASSERT_EQ(generate_data(config).errors.size(), 0u);
  ASSERT_EQ(train_models(config).errors.size(), 0u);
  const ArtifactLayout layout(config.output_dir);
  fs::remove(layout.model(config.model_configs[0].name, config.datasets[0], 0));
  fs::remove(layout.model(config.model_configs[0].name, config.datasets[0], 0) + ".key");
  const auto s = compute_attributions(config);
  EXPECT_EQ(s.errors.size(), 2u);
  EXPECT_EQ(s.record_files_computed, 2);
  EXPECT_EQ(s.exit_code(), 2);
  EXPECT_NE(s.errors[0].message.find("seed0"), std::string::npos);
}

TEST(Runner, IngestedRecordsReproduceTheReport) {
  TempDir tmp;
  auto config = small_config(tmp.path() / "out");
  config.faithfulness_enabled = false;
  run_experiment(config);
  const ArtifactLayout layout(config.output_dir);
  const auto& cfg = config.model_configs[0].name;
  const auto& ds = config.datasets[0];

  // Flatten everything into one external directory, as an exporter would.
  const auto ext = tmp.path() / "external";
  fs::create_directories(ext);
  for (auto seed : config.seeds) {
    for (Method m : config.methods) {
      fs::copy_file(layout.records(cfg, ds, seed, m),
                    ext / ("seed" + std::to_string(seed) + "_" + std::string(to_string(m)) + ".jsonl"));
    }
  }
  std::ofstream(ext / "manifest.json") << nlohmann::json{{"model_name", cfg},
                                                         {"seed", 0},
                                                         {"dataset_name", ds},
                                                         {"methods", {"VanGrad", "GradXI"}},
                                                         {"schema_version", kSchemaVersion}}
                                              .dump();
  const auto ingested = report_from_ingest(ext.string(), layout.dataset(ds), cfg);
  RunSummary summary;
  const auto native = assemble_report(config, summary);
  EXPECT_TRUE(summary.errors.empty());
  EXPECT_EQ(bias_report_csv(ingested), bias_report_csv(native));
  EXPECT_EQ(distributions_csv(ingested), distributions_csv(native));
}

}  // namespace
}  // namespace attrbias
