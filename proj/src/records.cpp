#include "attrbias/records.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "attrbias/error.hpp"

namespace attrbias {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T field(const json& obj, const char* key) {
  if (!obj.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + key + "' has the wrong type");
  }
}

int class_field(const json& obj, const char* key) {
  const auto& v = obj.contains(key) ? obj.at(key) : json();
  if (!v.is_number_integer()) throw DataError(std::string("field '") + key + "' must be an integer");
  const auto c = v.get<std::int64_t>();
  if (c != 0 && c != 1) throw DataError(std::string("field '") + key + "' must be 0 or 1");
  return static_cast<int>(c);
}

AttributionRecord record_from_json(const json& obj) {
  if (!obj.is_object()) throw DataError("record must be a JSON object");
  AttributionRecord r;
  r.instance_id = field<std::string>(obj, "instance_id");
  try {
    r.method = method_from_string(field<std::string>(obj, "method"));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  if (!obj.contains("seed") || !obj.at("seed").is_number_unsigned()) {
    throw DataError("field 'seed' must be a non-negative integer");
  }
  r.seed = obj.at("seed").get<std::uint64_t>();
  r.target_class = class_field(obj, "target_class");
  r.predicted_class = class_field(obj, "predicted_class");
  if (!obj.contains("predicted_proba") || !obj.at("predicted_proba").is_number()) {
    throw DataError("field 'predicted_proba' must be a number");
  }
  r.predicted_proba = obj.at("predicted_proba").get<double>();
  if (!(r.predicted_proba >= 0.0 && r.predicted_proba <= 1.0)) {
    throw DataError("field 'predicted_proba' must lie in [0, 1]");
  }
  if (!obj.contains("scores") || !obj.at("scores").is_array()) throw DataError("field 'scores' must be an array");
  for (const auto& s : obj.at("scores")) {
    if (!s.is_number()) throw DataError("field 'scores' must hold numbers");
    r.scores.push_back(s.get<double>());
  }
  if (!obj.contains("topk") || !obj.at("topk").is_array()) throw DataError("field 'topk' must be an array");
  for (const auto& t : obj.at("topk")) {
    if (!t.is_number_integer()) throw DataError("field 'topk' must hold integers");
    const auto v = t.get<std::int64_t>();
    if (v < 0) throw DataError("field 'topk' holds a negative index");
    r.topk.push_back(static_cast<int>(v));
  }
  if (r.topk.empty()) throw DataError("field 'topk' is empty");
  return r;
}

}  // namespace

std::string serialize_record(const AttributionRecord& r) {
  json obj;
  obj["instance_id"] = r.instance_id;
  obj["method"] = std::string(to_string(r.method));
  obj["seed"] = r.seed;
  obj["target_class"] = r.target_class;
  obj["predicted_class"] = r.predicted_class;
  obj["predicted_proba"] = r.predicted_proba;
  obj["scores"] = r.scores;
  obj["topk"] = r.topk;
  return obj.dump();
}

std::string serialize_records(const std::vector<AttributionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

std::vector<AttributionRecord> parse_records(const std::string& jsonl, const std::string& source,
                                             const Dataset* dataset) {
  std::vector<AttributionRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = record_from_json(json::parse(line));
      if (dataset) validate_record(rec, *dataset);
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataError(source + " line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError(source + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void validate_record(const AttributionRecord& r, const Dataset& dataset) {
  const Instance& in = dataset.find(r.instance_id);
  if (r.scores.size() != in.token_ids.size()) {
    throw DataError("scores length " + std::to_string(r.scores.size()) + " does not match instance length " +
                    std::to_string(in.token_ids.size()));
  }
  std::unordered_set<int> seen;
  for (int t : r.topk) {
    if (static_cast<std::size_t>(t) >= in.token_ids.size()) {
      throw DataError("topk index " + std::to_string(t) + " out of range");
    }
    if (!seen.insert(t).second) throw DataError("duplicate topk index " + std::to_string(t));
  }
}

void validate_records(const std::vector<AttributionRecord>& records, const Dataset& dataset,
                      const std::string& source) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      validate_record(records[i], dataset);
    } catch (const DataError& e) {
      throw DataError(source + " record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

void save_records(const std::vector<AttributionRecord>& records, const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << serialize_records(records);
    if (!out) throw DataError("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

std::vector<AttributionRecord> load_records(const std::string& path, const Dataset* dataset) {
  return parse_records(read_text(path), path, dataset);
}

ExportManifest parse_manifest(const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  ExportManifest m;
  try {
    m.schema_version = field<std::string>(obj, "schema_version");
    if (obj.contains("model_name")) m.model_name = obj.at("model_name").get<std::string>();
    if (obj.contains("seed")) m.seed = obj.at("seed").get<std::uint64_t>();
    if (obj.contains("dataset_name")) m.dataset_name = obj.at("dataset_name").get<std::string>();
    if (obj.contains("methods")) {
      for (const auto& name : obj.at("methods").get<std::vector<std::string>>()) {
        m.methods.push_back(method_from_string(name));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (m.schema_version != kSchemaVersion) {
    throw DataError("manifest schema_version " + m.schema_version + " does not match toolkit version " +
                    std::string(kSchemaVersion));
  }
  return m;
}

IngestResult ingest_external(const std::string& records_path, const std::string& dataset_path) {
  IngestResult result;
  result.dataset = load_dataset(dataset_path);
  std::vector<fs::path> files;
  fs::path dir;
  if (fs::is_directory(records_path)) {
    dir = records_path;
    for (const auto& e : fs::directory_iterator(records_path)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .jsonl record files in " + records_path);
  } else {
    files.push_back(records_path);
    dir = fs::path(records_path).parent_path();
  }
  const auto manifest_path = (dir.empty() ? fs::path("manifest.json") : dir / "manifest.json");
  if (fs::exists(manifest_path)) {
    result.manifest = parse_manifest(read_text(manifest_path.string()));
    if (!result.manifest->dataset_name.empty() && result.manifest->dataset_name != result.dataset.name) {
      throw DataError("manifest dataset_name '" + result.manifest->dataset_name + "' does not match dataset '" +
                      result.dataset.name + "'");
    }
  }
  for (const auto& f : files) {
    auto recs = load_records(f.string(), &result.dataset);
    result.records.insert(result.records.end(), std::make_move_iterator(recs.begin()),
                          std::make_move_iterator(recs.end()));
  }
  return result;
}

}  // namespace attrbias
