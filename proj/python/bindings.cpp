#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "attrbias/attribution.hpp"
#include "attrbias/biasmetrics.hpp"
#include "attrbias/datagen.hpp"
#include "attrbias/error.hpp"
#include "attrbias/records.hpp"
#include "attrbias/report.hpp"
#include "attrbias/runner.hpp"
#include "attrbias/toymodel.hpp"

namespace py = pybind11;
using namespace attrbias;

namespace {

py::dict record_to_dict(const AttributionRecord& r) {
  py::dict d;
  d["instance_id"] = r.instance_id;
  d["method"] = std::string(to_string(r.method));
  d["seed"] = r.seed;
  d["target_class"] = r.target_class;
  d["predicted_class"] = r.predicted_class;
  d["predicted_proba"] = r.predicted_proba;
  d["scores"] = r.scores;
  d["topk"] = r.topk;
  return d;
}

py::dict summary_to_dict(const RunSummary& s) {
  py::list errors;
  for (const auto& e : s.errors) {
    errors.append(py::make_tuple(e.kind == ErrorKind::kNumeric ? "numeric" : "data", e.message));
  }
  py::dict d;
  d["datasets_generated"] = s.datasets_generated;
  d["datasets_cached"] = s.datasets_cached;
  d["models_trained"] = s.models_trained;
  d["models_cached"] = s.models_cached;
  d["record_files_computed"] = s.record_files_computed;
  d["record_files_cached"] = s.record_files_cached;
  d["errors"] = errors;
  d["exit_code"] = s.exit_code();
  return d;
}

std::vector<BiasDistribution> from_count_lists(const std::vector<std::vector<std::int64_t>>& counts) {
  if (counts.empty()) throw UsageError("need at least one count vector");
  std::vector<std::string> cats;
  for (std::size_t i = 0; i < counts.front().size(); ++i) cats.push_back(std::to_string(i));
  std::vector<BiasDistribution> out;
  for (const auto& c : counts) {
    if (c.size() != cats.size()) throw DataError("count vectors differ in length");
    out.push_back(BiasDistribution::from_counts(Axis::kTokenPosition, cats, c));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Positional and lexical bias in feature attributions";
  m.attr("SCHEMA_VERSION") = std::string(kSchemaVersion);

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("methods", [] {
    std::vector<std::string> out;
    for (Method x : all_methods()) out.emplace_back(to_string(x));
    return out;
  });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def("__len__", [](const Dataset& d) { return d.instances.size(); })
      .def("vocab", [](const Dataset& d) { return d.vocab.tokens(); })
      .def("count", [](const Dataset& d, const std::string& split) { return d.count(split_from_string(split)); })
      .def("instance",
           [](const Dataset& d, std::size_t i) {
             if (i >= d.instances.size()) throw py::index_error();
             const auto& in = d.instances[i];
             std::vector<std::string> tokens;
             for (TokenId t : in.token_ids) tokens.push_back(d.vocab.surface(t));
             py::dict out;
             out["id"] = in.id;
             out["token_ids"] = in.token_ids;
             out["tokens"] = tokens;
             out["label"] = in.label;
             out["split"] = std::string(to_string(d.splits[i]));
             return out;
           })
      .def("save", [](const Dataset& d, const std::string& path) { save_dataset(d, path); })
      .def_static("load", &load_dataset);

  m.def("generate_dataset", [](const std::string& name, std::uint64_t seed) {
    if (name == kCausal) return build_causal_dataset(gen_synthetic_causal_corpus(seed, 1000, 1000), seed, {});
    return gen_artificial(name, seed);
  }, py::arg("name"), py::arg("seed") = 0);

  py::class_<TrainedModel>(m, "Model")
      .def_property_readonly("f1", [](const TrainedModel& t) { return t.metrics().f1; })
      .def_property_readonly("eval_split", [](const TrainedModel& t) { return t.metrics().eval_split; })
      .def("config", [](const TrainedModel& t) { return config_to_json(t.config()).dump(); })
      .def("predict_proba",
           [](const TrainedModel& t, const std::vector<TokenId>& content) {
             Instance in;
             in.token_ids = content;
             const auto p = predict_proba(t, in);
             return std::vector<double>(p.begin(), p.end());
           })
      .def("save", [](const TrainedModel& t, const std::string& path) { save_model(t, path); })
      .def_static("load", &load_model);

  m.def(
      "train",
      [](const Dataset& ds, std::uint64_t seed, bool positional, int epochs) {
        ModelConfig base;
        base.seed = seed;
        base.use_positional_embeddings = positional;
        base.hyperparams.epochs = epochs;
        py::gil_scoped_release release;
        return train(config_for(ds, base), ds);
      },
      py::arg("dataset"), py::arg("seed") = 0, py::arg("positional") = true, py::arg("epochs") = 5);

  m.def(
      "explain",
      [](const TrainedModel& model, const Dataset& ds, const std::string& instance_id, const std::string& method,
         int k, std::uint64_t seed, bool absolute) {
        AttributionOptions opts;
        opts.k = k;
        opts.ranking = absolute ? TopkRanking::kAbsolute : TopkRanking::kSigned;
        return record_to_dict(explain(model, ds.find(instance_id), method_from_string(method), opts, seed));
      },
      py::arg("model"), py::arg("dataset"), py::arg("instance_id"), py::arg("method"), py::arg("k") = 1,
      py::arg("seed") = 0, py::arg("absolute") = false);

  m.def("select_topk", [](const std::vector<double>& scores, int k, bool absolute) {
    return select_topk(scores, k, absolute ? TopkRanking::kAbsolute : TopkRanking::kSigned);
  }, py::arg("scores"), py::arg("k"), py::arg("absolute") = false);

  m.def("js_distance", [](const std::vector<double>& p, const std::vector<double>& q) { return js_distance(p, q); });
  m.def("bias_cons", [](const std::vector<std::vector<std::int64_t>>& counts) {
    return bias_cons(from_count_lists(counts));
  }, "Mean pairwise JS distance between per-seed top-k count vectors");
  m.def("bias_agg", [](const std::vector<std::vector<std::int64_t>>& counts) {
    const auto per_seed = from_count_lists(counts);
    return bias_agg(per_seed, uniform_baseline(Axis::kTokenPosition, per_seed.front().categories));
  }, "JS distance of the pooled counts from the uniform distribution");

  m.def("parse_records", [](const std::string& jsonl) {
    py::list out;
    for (const auto& r : parse_records(jsonl)) out.append(record_to_dict(r));
    return out;
  });

  m.def("default_config", [] { return experiment_to_json(default_experiment()).dump(2); });
  m.def("run_experiment", [](const std::string& config_json) {
    const auto config = experiment_from_json(nlohmann::json::parse(config_json));
    RunSummary s;
    {
      py::gil_scoped_release release;
      s = run_experiment(config);
    }
    return summary_to_dict(s);
  }, py::arg("config_json"));

  m.def(
      "ingest",
      [](const std::string& records_path, const std::string& dataset_path, const std::string& name,
         const std::string& out_dir) {
        const auto report = report_from_ingest(records_path, dataset_path, name);
        if (!out_dir.empty()) write_report(report, out_dir);
        return bias_report_csv(report);
      },
      py::arg("records_path"), py::arg("dataset_path"), py::arg("name") = "", py::arg("out_dir") = "",
      "Bias report CSV for externally produced records");
}
