#include "attrbias/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "attrbias/error.hpp"
#include "attrbias/hashing.hpp"
#include "attrbias/records.hpp"
#include "attrbias/report.hpp"

namespace attrbias {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw UsageError("config: datasets is empty");
  if (model_configs.empty()) throw UsageError("config: model_configs is empty");
  if (seeds.empty()) throw UsageError("config: seeds is empty");
  if (methods.empty()) throw UsageError("config: methods is empty");
  if (std::set(seeds.begin(), seeds.end()).size() != seeds.size()) throw UsageError("config: seeds must be distinct");
  if (std::set(datasets.begin(), datasets.end()).size() != datasets.size()) {
    throw UsageError("config: datasets must be distinct");
  }
  if (std::set(methods.begin(), methods.end()).size() != methods.size()) {
    throw UsageError("config: methods must be distinct");
  }
  std::set<std::string> names;
  for (const auto& v : model_configs) {
    if (v.name.empty() || v.name.find_first_of("/\\ ") != std::string::npos) {
      throw UsageError("config: model config name '" + v.name + "' is empty or has path characters");
    }
    if (!names.insert(v.name).second) throw UsageError("config: duplicate model config '" + v.name + "'");
    if (v.base.embed_dim < 1 || v.base.hidden_dim < 1) throw UsageError("config: model dimensions must be >= 1");
    if (v.base.hyperparams.epochs < 1 || v.base.hyperparams.batch_size < 1) {
      throw UsageError("config: epochs and batch_size must be >= 1");
    }
  }
  for (const auto& d : datasets) {
    if (d != kNounDetPeriod && d != kPeriodComma && d != kUniquePunctuation && d != kCausal) {
      throw UsageError("config: unknown dataset '" + d + "'");
    }
  }
  if (attribution.k < 1) throw UsageError("config: k must be >= 1");
  if (attribution.ig_steps < 2) throw UsageError("config: ig_steps must be >= 2");
  if (attribution.shap_max_evals < 2) throw UsageError("config: shap_max_evals must be >= 2");
  if (attribution.lime.n_samples < 2) throw UsageError("config: lime_samples must be >= 2");
  if (threads < 0) throw UsageError("config: threads must be >= 0");
}

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.datasets = {std::string(kNounDetPeriod), std::string(kPeriodComma), std::string(kUniquePunctuation)};
  ModelVariant pos{"positional", {}};
  ModelVariant nopos{"no-positional", {}};
  nopos.base.use_positional_embeddings = false;
  c.model_configs = {pos, nopos};
  for (std::uint64_t s = 0; s < 10; ++s) c.seeds.push_back(s);
  c.methods.assign(all_methods().begin(), all_methods().end());
  return c;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw UsageError("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json variant_to_json(const ModelVariant& v) {
  const auto& b = v.base;
  return {{"name", v.name},
          {"embed_dim", b.embed_dim},
          {"hidden_dim", b.hidden_dim},
          {"use_positional_embeddings", b.use_positional_embeddings},
          {"activation", b.activation == Activation::kTanh ? "tanh" : "identity"},
          {"learning_rate", b.hyperparams.learning_rate},
          {"epochs", b.hyperparams.epochs},
          {"batch_size", b.hyperparams.batch_size},
          {"weight_decay", b.hyperparams.weight_decay}};
}

ModelVariant variant_from_json(const json& j) {
  check_keys(j, {"name", "embed_dim", "hidden_dim", "use_positional_embeddings", "activation", "learning_rate",
                 "epochs", "batch_size", "weight_decay"},
             "model_configs entry");
  ModelVariant v;
  read(j, "name", v.name);
  read(j, "embed_dim", v.base.embed_dim);
  read(j, "hidden_dim", v.base.hidden_dim);
  read(j, "use_positional_embeddings", v.base.use_positional_embeddings);
  std::string act = "tanh";
  read(j, "activation", act);
  if (act != "tanh" && act != "identity") throw UsageError("config: unknown activation '" + act + "'");
  v.base.activation = act == "tanh" ? Activation::kTanh : Activation::kIdentity;
  read(j, "learning_rate", v.base.hyperparams.learning_rate);
  read(j, "epochs", v.base.hyperparams.epochs);
  read(j, "batch_size", v.base.hyperparams.batch_size);
  read(j, "weight_decay", v.base.hyperparams.weight_decay);
  return v;
}

json attribution_to_json(const AttributionOptions& a) {
  return {{"k", a.k},
          {"topk_ranking", a.ranking == TopkRanking::kSigned ? "signed" : "absolute"},
          {"ig_steps", a.ig_steps},
          {"ig_baseline", a.ig_baseline.kind == IgBaseline::Kind::kZero ? "zero" : "pad"},
          {"lime_samples", a.lime.n_samples},
          {"lime_kernel_width", a.lime.kernel_width ? json(*a.lime.kernel_width) : json(nullptr)},
          {"lime_ridge", a.lime.ridge},
          {"shap_max_evals", a.shap_max_evals}};
}

}  // namespace

json experiment_to_json(const ExperimentConfig& c) {
  json variants = json::array();
  for (const auto& v : c.model_configs) variants.push_back(variant_to_json(v));
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.emplace_back(to_string(m));
  json attribution = attribution_to_json(c.attribution);
  attribution.erase("k");
  const auto& d = c.causal.design;
  return {{"datasets", c.datasets},
          {"model_configs", variants},
          {"seeds", c.seeds},
          {"methods", methods},
          {"k", c.attribution.k},
          {"output_dir", c.output_dir},
          {"data_seed", c.data_seed},
          {"test_limit", c.test_limit},
          {"threads", c.threads},
          {"attribution", attribution},
          {"faithfulness",
           {{"enabled", c.faithfulness_enabled},
            {"corruption", c.faithfulness.corruption == CorruptionMode::kDelete ? "delete" : "mask"},
            {"sufficiency_reading",
             c.faithfulness.sufficiency_reading == SufficiencyReading::kFormula ? "formula" : "prose"}}},
          {"causal",
           {{"corpus_path", c.causal.corpus_path ? json(*c.causal.corpus_path) : json(nullptr)},
            {"n_pos", c.causal.n_pos},
            {"n_neg", c.causal.n_neg},
            {"train_triples", d.train_triples},
            {"test_triples", d.test_triples},
            {"min_per_class", d.min_per_class},
            {"test_pool_fraction", d.test_pool_fraction}}}};
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c = default_experiment();
  try {
    check_keys(j, {"datasets", "model_configs", "seeds", "methods", "k", "output_dir", "data_seed", "test_limit",
                   "threads", "attribution", "faithfulness", "causal"},
               "config");
    read(j, "datasets", c.datasets);
    if (j.contains("model_configs")) {
      c.model_configs.clear();
      for (const auto& v : j.at("model_configs")) c.model_configs.push_back(variant_from_json(v));
    }
    read(j, "seeds", c.seeds);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods").get<std::vector<std::string>>()) c.methods.push_back(method_from_string(m));
    }
    read(j, "k", c.attribution.k);
    read(j, "output_dir", c.output_dir);
    read(j, "data_seed", c.data_seed);
    read(j, "test_limit", c.test_limit);
    read(j, "threads", c.threads);
    if (j.contains("attribution")) {
      const auto& a = j.at("attribution");
      check_keys(a, {"topk_ranking", "ig_steps", "ig_baseline", "lime_samples", "lime_kernel_width", "lime_ridge",
                     "shap_max_evals"},
                 "attribution");
      std::string ranking = "signed", baseline = "pad";
      read(a, "topk_ranking", ranking);
      if (ranking != "signed" && ranking != "absolute") throw UsageError("config: topk_ranking must be signed|absolute");
      c.attribution.ranking = ranking == "signed" ? TopkRanking::kSigned : TopkRanking::kAbsolute;
      read(a, "ig_steps", c.attribution.ig_steps);
      read(a, "ig_baseline", baseline);
      if (baseline != "pad" && baseline != "zero") throw UsageError("config: ig_baseline must be pad|zero");
      c.attribution.ig_baseline = baseline == "pad" ? IgBaseline::pad() : IgBaseline::zero();
      read(a, "lime_samples", c.attribution.lime.n_samples);
      if (a.contains("lime_kernel_width") && !a.at("lime_kernel_width").is_null()) {
        c.attribution.lime.kernel_width = a.at("lime_kernel_width").get<double>();
      }
      read(a, "lime_ridge", c.attribution.lime.ridge);
      read(a, "shap_max_evals", c.attribution.shap_max_evals);
    }
    if (j.contains("faithfulness")) {
      const auto& f = j.at("faithfulness");
      check_keys(f, {"enabled", "corruption", "sufficiency_reading"}, "faithfulness");
      read(f, "enabled", c.faithfulness_enabled);
      std::string corruption = "delete", reading = "formula";
      read(f, "corruption", corruption);
      read(f, "sufficiency_reading", reading);
      if (corruption != "delete" && corruption != "mask") throw UsageError("config: corruption must be delete|mask");
      if (reading != "formula" && reading != "prose") {
        throw UsageError("config: sufficiency_reading must be formula|prose");
      }
      c.faithfulness.corruption = corruption == "delete" ? CorruptionMode::kDelete : CorruptionMode::kMask;
      c.faithfulness.sufficiency_reading =
          reading == "formula" ? SufficiencyReading::kFormula : SufficiencyReading::kProse;
    }
    if (j.contains("causal")) {
      const auto& k = j.at("causal");
      check_keys(k, {"corpus_path", "n_pos", "n_neg", "train_triples", "test_triples", "min_per_class",
                     "test_pool_fraction"},
                 "causal");
      if (k.contains("corpus_path") && !k.at("corpus_path").is_null()) {
        c.causal.corpus_path = k.at("corpus_path").get<std::string>();
      }
      read(k, "n_pos", c.causal.n_pos);
      read(k, "n_neg", c.causal.n_neg);
      read(k, "train_triples", c.causal.design.train_triples);
      read(k, "test_triples", c.causal.design.test_triples);
      read(k, "min_per_class", c.causal.design.min_per_class);
      read(k, "test_pool_fraction", c.causal.design.test_pool_fraction);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

std::string resolve_output_dir(const std::string& output_dir) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root && *root && fs::path(output_dir).is_relative()) return (fs::path(root) / output_dir).string();
  return output_dir;
}

// ---------------------------------------------------------------------------
// Layout and caching

std::string ArtifactLayout::dataset(const std::string& name) const {
  return (fs::path(root_) / "data" / (name + ".jsonl")).string();
}
std::string ArtifactLayout::model(const std::string& cfg, const std::string& ds, std::uint64_t seed) const {
  return (fs::path(root_) / "models" / cfg / ds / ("seed" + std::to_string(seed) + ".model.json")).string();
}
std::string ArtifactLayout::records(const std::string& cfg, const std::string& ds, std::uint64_t seed,
                                    Method m) const {
  return (fs::path(root_) / "records" / cfg / ds / ("seed" + std::to_string(seed)) /
          (std::string(to_string(m)) + ".jsonl"))
      .string();
}
std::string ArtifactLayout::report_dir() const { return (fs::path(root_) / "report").string(); }
std::string ArtifactLayout::errors_log() const { return (fs::path(root_) / "errors.log").string(); }

void RunSummary::merge(const RunSummary& o) {
  datasets_generated += o.datasets_generated;
  datasets_cached += o.datasets_cached;
  models_trained += o.models_trained;
  models_cached += o.models_cached;
  record_files_computed += o.record_files_computed;
  record_files_cached += o.record_files_cached;
  errors.insert(errors.end(), o.errors.begin(), o.errors.end());
}

int RunSummary::exit_code() const {
  if (errors.empty()) return 0;
  for (const auto& e : errors) {
    if (e.kind == ErrorKind::kNumeric) return 3;
  }
  return 2;
}

namespace {

std::string key_path(const std::string& artifact) { return artifact + ".key"; }

bool cache_hit(const std::string& artifact, const std::string& key) {
  if (!fs::exists(artifact) || !fs::exists(key_path(artifact))) return false;
  std::ifstream in(key_path(artifact), std::ios::binary);
  std::string stored;
  std::getline(in, stored);
  return stored == key;
}

void write_key(const std::string& artifact, const std::string& key) {
  std::ofstream out(key_path(artifact), std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + key_path(artifact));
  out << key << "\n";
}

std::string dataset_hash(const std::string& jsonl_path) {
  return sha256_hex(sha256_file(jsonl_path) + sha256_file(header_path_for(jsonl_path)));
}

Dataset load_generated(const ArtifactLayout& layout, const std::string& name) {
  const auto path = layout.dataset(name);
  if (!fs::exists(path)) throw DataError("dataset '" + name + "' not generated yet (run gen-data)");
  return load_dataset(path);
}

// Runs f(0..n-1) on up to `threads` workers; f must not throw.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  std::size_t workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                     : static_cast<std::size_t>(threads);
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  }
}

// Per-task outcome slots keep error order independent of scheduling.
struct TaskOutcome {
  bool cached = false;
  bool done = false;
  std::optional<CellError> error;
};

template <typename Body>
TaskOutcome guarded(const std::string& label, Body&& body) {
  TaskOutcome out;
  try {
    out.cached = body();
    out.done = true;
  } catch (const NumericError& e) {
    out.error = CellError{ErrorKind::kNumeric, label + ": " + e.what()};
  } catch (const std::exception& e) {
    out.error = CellError{ErrorKind::kData, label + ": " + e.what()};
  }
  return out;
}

Dataset build_dataset(const ExperimentConfig& config, const std::string& name) {
  if (name != kCausal) return gen_artificial(name, config.data_seed);
  const Corpus corpus = config.causal.corpus_path
                            ? load_corpus(*config.causal.corpus_path)
                            : gen_synthetic_causal_corpus(config.data_seed, config.causal.n_pos, config.causal.n_neg);
  return build_causal_dataset(corpus, config.data_seed, config.causal.design);
}

std::string dataset_key(const ExperimentConfig& config, const std::string& name) {
  json k = {{"schema", kSchemaVersion}, {"name", name}, {"data_seed", config.data_seed}};
  if (name == kCausal) {
    k["causal"] = experiment_to_json(config).at("causal");
    if (config.causal.corpus_path) k["corpus_sha256"] = sha256_file(*config.causal.corpus_path);
  }
  return sha256_hex(k.dump());
}

ModelConfig model_config_for(const ModelVariant& v, const Dataset& ds, std::uint64_t seed) {
  ModelConfig base = v.base;
  base.seed = seed;
  return config_for(ds, base);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

RunSummary generate_data(const ExperimentConfig& config) {
  config.validate();
  const ArtifactLayout layout(resolve_output_dir(config.output_dir));
  RunSummary summary;
  for (const auto& name : config.datasets) {
    const auto out = guarded("gen-data " + name, [&] {
      const auto path = layout.dataset(name);
      const auto key = dataset_key(config, name);
      if (cache_hit(path, key) && fs::exists(header_path_for(path))) return true;
      save_dataset(build_dataset(config, name), path);
      write_key(path, key);
      return false;
    });
    if (out.error) summary.errors.push_back(*out.error);
    if (out.done) ++(out.cached ? summary.datasets_cached : summary.datasets_generated);
  }
  return summary;
}

RunSummary train_models(const ExperimentConfig& config) {
  config.validate();
  const ArtifactLayout layout(resolve_output_dir(config.output_dir));
  RunSummary summary;
  for (const auto& name : config.datasets) {
    Dataset ds;
    std::string ds_hash;
    try {
      ds = load_generated(layout, name);
      ds_hash = dataset_hash(layout.dataset(name));
    } catch (const std::exception& e) {
      summary.errors.push_back({ErrorKind::kData, "train " + name + ": " + e.what()});
      continue;
    }
    struct Task {
      const ModelVariant* variant;
      std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& v : config.model_configs) {
      for (auto s : config.seeds) tasks.push_back({&v, s});
    }
    std::vector<TaskOutcome> outcomes(tasks.size());
    parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
      const auto& t = tasks[i];
      outcomes[i] = guarded("train " + t.variant->name + "/" + name + "/seed" + std::to_string(t.seed), [&] {
        const auto cfg = model_config_for(*t.variant, ds, t.seed);
        const auto path = layout.model(t.variant->name, name, t.seed);
        const auto key = sha256_hex(config_to_json(cfg).dump() + "|" + ds_hash);
        if (cache_hit(path, key)) return true;
        save_model(train(cfg, ds), path);
        write_key(path, key);
        return false;
      });
    });
    for (const auto& o : outcomes) {
      if (o.error) summary.errors.push_back(*o.error);
      if (o.done) ++(o.cached ? summary.models_cached : summary.models_trained);
    }
  }
  return summary;
}

RunSummary compute_attributions(const ExperimentConfig& config) {
  config.validate();
  const ArtifactLayout layout(resolve_output_dir(config.output_dir));
  RunSummary summary;
  json opts = attribution_to_json(config.attribution);
  opts["test_limit"] = config.test_limit;
  const auto opts_text = opts.dump();
  for (const auto& name : config.datasets) {
    Dataset ds;
    std::string ds_hash;
    try {
      ds = load_generated(layout, name);
      ds_hash = dataset_hash(layout.dataset(name));
    } catch (const std::exception& e) {
      summary.errors.push_back({ErrorKind::kData, "attribute " + name + ": " + e.what()});
      continue;
    }
    struct Task {
      const ModelVariant* variant;
      std::uint64_t seed;
      Method method;
    };
    std::vector<Task> tasks;
    for (const auto& v : config.model_configs) {
      for (auto s : config.seeds) {
        for (Method m : config.methods) tasks.push_back({&v, s, m});
      }
    }
    std::vector<TaskOutcome> outcomes(tasks.size());
    parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
      const auto& t = tasks[i];
      const auto label = "attribute " + t.variant->name + "/" + name + "/seed" + std::to_string(t.seed) + "/" +
                         std::string(to_string(t.method));
      outcomes[i] = guarded(label, [&] {
        const auto model_path = layout.model(t.variant->name, name, t.seed);
        if (!fs::exists(model_path)) throw DataError("model not trained (run train)");
        const auto path = layout.records(t.variant->name, name, t.seed, t.method);
        const auto key = sha256_hex(sha256_file(model_path) + "|" + ds_hash + "|" +
                                    std::string(to_string(t.method)) + "|" + opts_text);
        if (cache_hit(path, key)) return true;
        const auto model = load_model(model_path);
        save_records(explain_split(model, ds, Split::kTest, t.method, config.attribution, t.seed, config.test_limit),
                     path);
        write_key(path, key);
        return false;
      });
    });
    for (const auto& o : outcomes) {
      if (o.error) summary.errors.push_back(*o.error);
      if (o.done) ++(o.cached ? summary.record_files_cached : summary.record_files_computed);
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Report

std::vector<Axis> axes_for(const Dataset& dataset) {
  if (dataset.has_sentence_boundaries()) return {Axis::kSentencePosition, Axis::kLexical};
  return {Axis::kTokenPosition, Axis::kLexical};
}

namespace {

std::vector<std::pair<std::string, std::optional<int>>> slices_for(Axis axis) {
  if (axis == Axis::kSentencePosition) return {{"all", std::nullopt}, {"pos", 1}, {"neg", 0}};
  return {{"all", std::nullopt}};
}

}  // namespace

BiasReport compute_bias_report(const std::vector<ReportCell>& cells) {
  BiasReport report;
  for (const auto& cell : cells) {
    if (!cell.dataset) throw UsageError("report cell without dataset");
    const Dataset& ds = *cell.dataset;
    for (Axis axis : axes_for(ds)) {
      const Baseline baseline = uniform_baseline(axis, axis_categories(axis, ds));
      for (const auto& [slice, filter] : slices_for(axis)) {
        std::map<Method, BiasDistribution> aggregates;
        std::vector<BiasRow> rows;
        for (const auto& [method, by_seed] : cell.records) {
          BiasRow row{cell.model_config, ds.name, method, axis, slice, 0, {}, {}, {}, {}, {}};
          std::vector<BiasDistribution> per_seed;
          for (const auto& [seed, recs] : by_seed) {
            try {
              per_seed.push_back(build_distribution(recs, axis, ds, filter));
            } catch (const DataError&) {
              // No top-k hits in this slice for this seed.
              continue;
            }
            report.distributions.push_back({cell.model_config, ds.name, method, axis, slice, seed, per_seed.back()});
          }
          row.seeds_used = static_cast<int>(per_seed.size());
          if (!per_seed.empty()) {
            auto agg = aggregate(per_seed);
            row.bias_agg = js_distance(agg, baseline.distribution);
            if (per_seed.size() >= 2) row.bias_cons = bias_cons(per_seed);
            report.distributions.push_back({cell.model_config, ds.name, method, axis, slice, std::nullopt, agg});
            aggregates.emplace(method, std::move(agg));
          }
          rows.push_back(std::move(row));
        }
        if (aggregates.size() >= 2) {
          for (auto& r : rows) {
            if (aggregates.count(r.method)) r.bias_attr = bias_attr(aggregates, r.method);
          }
        }
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      }
    }
  }
  return report;
}

void attach_faithfulness(BiasReport& report, std::vector<FaithfulnessRow> rows) {
  for (auto& r : report.rows) {
    double suff = 0.0, cmp = 0.0;
    int n = 0;
    for (const auto& f : rows) {
      if (f.model_config == r.model_config && f.dataset == r.dataset && f.result.method == r.method) {
        suff += f.result.suff;
        cmp += f.result.cmp;
        ++n;
      }
    }
    if (n) {
      r.suff = suff / n;
      r.cmp = cmp / n;
    }
  }
  report.faithfulness = std::move(rows);
}

namespace {

struct LoadedCell {
  ReportCell cell;
  std::vector<TrainingRow> training;
};

std::vector<LoadedCell> load_cells(const ExperimentConfig& config, const ArtifactLayout& layout,
                                   std::vector<Dataset>& datasets, RunSummary& summary) {
  datasets.clear();
  datasets.reserve(config.datasets.size());
  for (const auto& name : config.datasets) {
    try {
      datasets.push_back(load_generated(layout, name));
    } catch (const std::exception& e) {
      summary.errors.push_back({ErrorKind::kData, "report " + name + ": " + e.what()});
    }
  }
  std::vector<LoadedCell> out;
  for (const auto& v : config.model_configs) {
    for (const auto& ds : datasets) {
      LoadedCell lc;
      lc.cell.model_config = v.name;
      lc.cell.dataset = &ds;
      for (auto seed : config.seeds) {
        const auto model_path = layout.model(v.name, ds.name, seed);
        if (fs::exists(model_path)) {
          try {
            const auto m = load_model(model_path);
            lc.training.push_back({v.name, ds.name, seed, m.metrics().eval_split, m.metrics().f1});
          } catch (const std::exception& e) {
            summary.errors.push_back({ErrorKind::kData, "report " + model_path + ": " + e.what()});
          }
        }
        for (Method m : config.methods) {
          const auto path = layout.records(v.name, ds.name, seed, m);
          try {
            if (!fs::exists(path)) throw DataError("records missing (run attribute)");
            lc.cell.records[m][seed] = load_records(path, &ds);
          } catch (const std::exception& e) {
            summary.errors.push_back({ErrorKind::kData, "report " + path + ": " + e.what()});
          }
        }
      }
      out.push_back(std::move(lc));
    }
  }
  return out;
}

}  // namespace

std::vector<FaithfulnessRow> compute_faithfulness(const ExperimentConfig& config, RunSummary& summary) {
  const ArtifactLayout layout(resolve_output_dir(config.output_dir));
  std::vector<Dataset> datasets;
  const auto cells = load_cells(config, layout, datasets, summary);
  struct Task {
    const LoadedCell* cell;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& lc : cells) {
    for (auto seed : config.seeds) tasks.push_back({&lc, seed});
  }
  std::vector<std::vector<FaithfulnessRow>> results(tasks.size());
  std::vector<std::vector<CellError>> errors(tasks.size());
  parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto& cell = t.cell->cell;
    const auto label = "faithfulness " + cell.model_config + "/" + cell.dataset->name + "/seed" + std::to_string(t.seed);
    std::optional<TrainedModel> model;
    const auto load = guarded(label, [&] {
      model = load_model(layout.model(cell.model_config, cell.dataset->name, t.seed));
      return false;
    });
    if (load.error) {
      errors[i].push_back(*load.error);
      return;
    }
    for (const auto& [method, by_seed] : cell.records) {
      const auto it = by_seed.find(t.seed);
      if (it == by_seed.end()) continue;
      const auto out = guarded(label + "/" + std::string(to_string(method)), [&] {
        results[i].push_back(
            {cell.model_config, cell.dataset->name, evaluate_faithfulness(*model, *cell.dataset, it->second, config.faithfulness)});
        return false;
      });
      if (out.error) errors[i].push_back(*out.error);
    }
  });
  std::vector<FaithfulnessRow> rows;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    rows.insert(rows.end(), results[i].begin(), results[i].end());
    summary.errors.insert(summary.errors.end(), errors[i].begin(), errors[i].end());
  }
  // Method-major order within each (config, dataset) block.
  std::stable_sort(rows.begin(), rows.end(), [](const FaithfulnessRow& a, const FaithfulnessRow& b) {
    return std::tie(a.model_config, a.dataset) == std::tie(b.model_config, b.dataset) &&
           a.result.method < b.result.method;
  });
  return rows;
}

BiasReport assemble_report(const ExperimentConfig& config, RunSummary& summary) {
  config.validate();
  const ArtifactLayout layout(resolve_output_dir(config.output_dir));
  std::vector<Dataset> datasets;
  const auto loaded = load_cells(config, layout, datasets, summary);
  std::vector<ReportCell> cells;
  std::vector<TrainingRow> training;
  for (const auto& lc : loaded) {
    cells.push_back(lc.cell);
    training.insert(training.end(), lc.training.begin(), lc.training.end());
  }
  BiasReport report = compute_bias_report(cells);
  report.training = std::move(training);
  if (config.faithfulness_enabled) {
    RunSummary inner;
    auto rows = compute_faithfulness(config, inner);
    // load_cells already reported missing artifacts once.
    for (const auto& e : inner.errors) {
      if (e.message.rfind("faithfulness", 0) == 0) summary.errors.push_back(e);
    }
    attach_faithfulness(report, std::move(rows));
  }
  return report;
}

RunSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const ArtifactLayout layout(resolve_output_dir(config.output_dir));
  fs::create_directories(layout.root());
  {
    std::ofstream out(fs::path(layout.root()) / "config.json", std::ios::binary | std::ios::trunc);
    out << experiment_to_json(config).dump(2) << "\n";
  }
  RunSummary summary = generate_data(config);
  summary.merge(train_models(config));
  summary.merge(compute_attributions(config));
  RunSummary report_summary;
  const auto report = assemble_report(config, report_summary);
  write_report(report, layout.report_dir());
  // Missing upstream artifacts already appear as stage errors.
  if (summary.errors.empty()) summary.errors = report_summary.errors;
  write_error_log(layout, summary);
  return summary;
}

void write_error_log(const ArtifactLayout& layout, const RunSummary& summary) {
  fs::create_directories(layout.root());
  std::ofstream log(layout.errors_log(), std::ios::binary | std::ios::trunc);
  for (const auto& e : summary.errors) {
    log << (e.kind == ErrorKind::kNumeric ? "numeric" : "data") << "\t" << e.message << "\n";
  }
}

BiasReport report_from_ingest(const std::string& records_path, const std::string& dataset_path,
                              const std::string& model_config_name) {
  auto ingested = ingest_external(records_path, dataset_path);
  if (ingested.records.empty()) throw DataError("no records to ingest in " + records_path);
  ReportCell cell;
  cell.model_config = model_config_name;
  if (cell.model_config.empty()) {
    cell.model_config =
        ingested.manifest && !ingested.manifest->model_name.empty() ? ingested.manifest->model_name : "external";
  }
  cell.dataset = &ingested.dataset;
  for (auto& r : ingested.records) cell.records[r.method][r.seed].push_back(std::move(r));
  return compute_bias_report({cell});
}

}  // namespace attrbias
