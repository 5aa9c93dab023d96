#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "attrbias/attribution.hpp"
#include "attrbias/biasmetrics.hpp"
#include "attrbias/datagen.hpp"
#include "attrbias/faithfulness.hpp"
#include "attrbias/toymodel.hpp"

namespace attrbias {

inline constexpr const char* kOutputRootEnv = "ATTRBIAS_OUTPUT_ROOT";

struct ModelVariant {
  std::string name;
  ModelConfig base;  // vocab_size and max_len are filled in per dataset
};

struct CausalOptions {
  std::optional<std::string> corpus_path;  // JSONL {text, label}; synthetic when absent
  int n_pos = 1000;
  int n_neg = 1000;
  CausalDesign design;
};

struct ExperimentConfig {
  std::vector<std::string> datasets;
  std::vector<ModelVariant> model_configs;
  std::vector<std::uint64_t> seeds;
  std::vector<Method> methods;
  std::string output_dir = "attrbias-out";
  std::uint64_t data_seed = 0;
  std::size_t test_limit = 0;  // 0 explains every test instance
  int threads = 1;             // 0 uses every hardware thread
  AttributionOptions attribution;  // attribution.k is the top-k size
  bool faithfulness_enabled = true;
  FaithfulnessOptions faithfulness;
  CausalOptions causal;

  // Throws UsageError on empty lists, duplicate seeds or names, bad values.
  void validate() const;
};

// Three artificial datasets, with and without positional embeddings,
// seeds 0-9, all six methods, k = 1.
ExperimentConfig default_experiment();
nlohmann::json experiment_to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys are a UsageError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

// output_dir, placed under $ATTRBIAS_OUTPUT_ROOT when that is set and the
// directory is relative.
std::string resolve_output_dir(const std::string& output_dir);

class ArtifactLayout {
 public:
  explicit ArtifactLayout(std::string root) : root_(std::move(root)) {}
  const std::string& root() const { return root_; }
  std::string dataset(const std::string& name) const;
  std::string model(const std::string& cfg, const std::string& ds, std::uint64_t seed) const;
  std::string records(const std::string& cfg, const std::string& ds, std::uint64_t seed, Method m) const;
  std::string report_dir() const;
  std::string errors_log() const;

 private:
  std::string root_;
};

enum class ErrorKind { kData, kNumeric };

struct CellError {
  ErrorKind kind;
  std::string message;
};

struct RunSummary {
  int datasets_generated = 0;
  int datasets_cached = 0;
  int models_trained = 0;
  int models_cached = 0;
  int record_files_computed = 0;
  int record_files_cached = 0;
  std::vector<CellError> errors;

  void merge(const RunSummary& other);
  // 0 when clean, 3 if any numeric failure, else 2.
  int exit_code() const;
};

struct TrainingRow {
  std::string model_config, dataset;
  std::uint64_t seed = 0;
  std::string eval_split;
  double f1 = 0.0;
};

struct FaithfulnessRow {
  std::string model_config, dataset;
  FaithfulnessResult result;
};

struct BiasRow {
  std::string model_config, dataset;
  Method method = Method::kVanGrad;
  Axis axis = Axis::kTokenPosition;
  std::string class_slice;  // all | pos | neg
  int seeds_used = 0;
  std::optional<double> bias_cons, bias_agg, bias_attr, suff, cmp;
};

struct DistributionRow {
  std::string model_config, dataset;
  Method method = Method::kVanGrad;
  Axis axis = Axis::kTokenPosition;
  std::string class_slice;
  std::optional<std::uint64_t> seed;  // absent for the seed aggregate
  BiasDistribution distribution;
};

struct BiasReport {
  std::vector<BiasRow> rows;
  std::vector<DistributionRow> distributions;
  std::vector<FaithfulnessRow> faithfulness;
  std::vector<TrainingRow> training;
};

// Records of one (model config, dataset) pair, by method and seed.
struct ReportCell {
  std::string model_config;
  const Dataset* dataset = nullptr;
  std::map<Method, std::map<std::uint64_t, std::vector<AttributionRecord>>> records;
};

// Position (or sentence position when the dataset has boundaries) and lexical.
std::vector<Axis> axes_for(const Dataset& dataset);

// Bias metrics only. Seeds whose slice is empty are skipped; Bias-cons needs
// two usable seeds and Bias-attr two methods, otherwise the value is absent.
BiasReport compute_bias_report(const std::vector<ReportCell>& cells);

// Copies per-seed mean suff/cmp onto every matching bias row.
void attach_faithfulness(BiasReport& report, std::vector<FaithfulnessRow> rows);

// Stages. Each skips artifacts whose content key is unchanged.
RunSummary generate_data(const ExperimentConfig& config);
RunSummary train_models(const ExperimentConfig& config);
RunSummary compute_attributions(const ExperimentConfig& config);
// Reads persisted records and models; faithfulness only when enabled.
BiasReport assemble_report(const ExperimentConfig& config, RunSummary& summary);
std::vector<FaithfulnessRow> compute_faithfulness(const ExperimentConfig& config, RunSummary& summary);

// All stages, then the report files. Errors of individual cells are logged to
// errors.log and do not stop other cells.
RunSummary run_experiment(const ExperimentConfig& config);
// One tab-separated line per error; an empty file when the run was clean.
void write_error_log(const ArtifactLayout& layout, const RunSummary& summary);

// Bias report for external records; no faithfulness (no model to query).
// An empty name falls back to the manifest model_name, then "external".
BiasReport report_from_ingest(const std::string& records_path, const std::string& dataset_path,
                              const std::string& model_config_name);

}  // namespace attrbias
