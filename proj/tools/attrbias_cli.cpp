#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "attrbias/error.hpp"
#include "attrbias/report.hpp"
#include "attrbias/runner.hpp"

using namespace attrbias;

namespace {

struct Overrides {
  std::string config_path;
  std::string out;
  std::vector<std::string> datasets;
  std::string seeds;
  std::vector<std::string> methods;
  int k = 0;
  std::size_t test_limit = 0;
  bool test_limit_set = false;
  int threads = -1;
  bool topk_absolute = false;
};

// "0-9", "0,3,5" or a mix of both.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw UsageError("bad seed range '" + part + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const UsageError&) {
      throw;
    } catch (const std::logic_error&) {
      throw UsageError("bad seed list '" + text + "'");
    }
  }
  return out;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--datasets", o.datasets, "Datasets to use")->delimiter(',');
  cmd->add_option("--seeds", o.seeds, "Model seeds, e.g. 0-9 or 0,2,4");
  cmd->add_option("--methods", o.methods, "Attribution methods")->delimiter(',');
  cmd->add_option("--k", o.k, "Top-k size")->check(CLI::PositiveNumber);
  cmd->add_option("--test-limit", o.test_limit, "Explain at most this many test instances (0 = all)")
      ->each([&](const std::string&) { o.test_limit_set = true; });
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--topk-absolute", o.topk_absolute, "Rank top-k by absolute score");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? default_experiment() : load_experiment(o.config_path);
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.datasets.empty()) c.datasets = o.datasets;
  if (!o.seeds.empty()) c.seeds = parse_seeds(o.seeds);
  if (!o.methods.empty()) {
    c.methods.clear();
    for (const auto& m : o.methods) c.methods.push_back(method_from_string(m));
  }
  if (o.k > 0) c.attribution.k = o.k;
  if (o.test_limit_set) c.test_limit = o.test_limit;
  if (o.threads >= 0) c.threads = o.threads;
  if (o.topk_absolute) c.attribution.ranking = TopkRanking::kAbsolute;
  c.validate();
  return c;
}

int finish(const ArtifactLayout& layout, const RunSummary& s) {
  write_error_log(layout, s);
  std::cerr << "datasets " << s.datasets_generated << " generated, " << s.datasets_cached << " cached; models "
            << s.models_trained << " trained, " << s.models_cached << " cached; record files "
            << s.record_files_computed << " computed, " << s.record_files_cached << " cached\n";
  for (const auto& e : s.errors) std::cerr << (e.kind == ErrorKind::kNumeric ? "numeric: " : "data: ") << e.message << "\n";
  return s.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Positional and lexical bias in feature attributions"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<CLI::App*> stages;
  for (const char* verb : {"gen-data", "train", "attribute", "bias-report", "faithfulness", "run-all"}) {
    auto* cmd = app.add_subcommand(verb);
    add_common(cmd, o);
    stages.push_back(cmd);
  }
  stages[0]->description("Generate the datasets");
  stages[1]->description("Train one model per (config, dataset, seed)");
  stages[2]->description("Compute attribution records on the test split");
  stages[3]->description("Compute bias metrics and write the report");
  stages[4]->description("Compute sufficiency and comprehensiveness");
  stages[5]->description("All of the above");

  std::string records_path, data_path, ingest_out = "attrbias-ingest", ingest_name;
  auto* ingest = app.add_subcommand("ingest", "Bias report for externally produced attribution records");
  ingest->add_option("--records", records_path, "Records JSONL file or directory")->required();
  ingest->add_option("--data", data_path, "Dataset JSONL the records refer to")->required();
  ingest->add_option("--out", ingest_out, "Output directory");
  ingest->add_option("--name", ingest_name, "Model name for the report (default: manifest model_name)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) {
      const auto report = report_from_ingest(records_path, data_path, ingest_name);
      const auto out = resolve_output_dir(ingest_out);
      write_report(report, (std::filesystem::path(out) / "report").string());
      std::cerr << "wrote " << report.rows.size() << " bias rows to " << out << "/report\n";
      return 0;
    }
    const auto config = resolve(o);
    const ArtifactLayout layout(resolve_output_dir(config.output_dir));
    if (stages[0]->parsed()) return finish(layout, generate_data(config));
    if (stages[1]->parsed()) return finish(layout, train_models(config));
    if (stages[2]->parsed()) return finish(layout, compute_attributions(config));
    if (stages[3]->parsed()) {
      RunSummary s;
      write_report(assemble_report(config, s), layout.report_dir());
      return finish(layout, s);
    }
    if (stages[4]->parsed()) {
      RunSummary s;
      BiasReport report;
      report.faithfulness = compute_faithfulness(config, s);
      const auto path = std::filesystem::path(layout.report_dir()) / "faithfulness.csv";
      std::filesystem::create_directories(path.parent_path());
      std::ofstream(path, std::ios::binary) << faithfulness_csv(report);
      return finish(layout, s);
    }
    return finish(layout, run_experiment(config));
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
