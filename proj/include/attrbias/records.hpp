#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attrbias/attribution.hpp"
#include "attrbias/dataset.hpp"

namespace attrbias {

// One JSON object per line, no trailing newline.
std::string serialize_record(const AttributionRecord& record);
std::string serialize_records(const std::vector<AttributionRecord>& records);

// Checks a record against its instance: known id, one score per content
// token, top-k indices in range and distinct.
void validate_record(const AttributionRecord& record, const Dataset& dataset);
void validate_records(const std::vector<AttributionRecord>& records, const Dataset& dataset,
                      const std::string& source = "records");

// Errors carry `source` and the 1-based line number. With a dataset, each
// record is also checked by validate_record.
std::vector<AttributionRecord> parse_records(const std::string& jsonl,
                                             const std::string& source = "records",
                                             const Dataset* dataset = nullptr);

void save_records(const std::vector<AttributionRecord>& records, const std::string& path);
std::vector<AttributionRecord> load_records(const std::string& path, const Dataset* dataset = nullptr);

struct ExportManifest {
  std::string model_name;
  std::uint64_t seed = 0;
  std::string dataset_name;
  std::vector<Method> methods;
  std::string schema_version;
};

ExportManifest parse_manifest(const std::string& json_text);

struct IngestResult {
  Dataset dataset;
  std::vector<AttributionRecord> records;
  std::optional<ExportManifest> manifest;
};

// `records_path` is a JSONL file or a directory of *.jsonl files (read in
// name order). A manifest.json beside the records must carry the toolkit's
// schema version.
IngestResult ingest_external(const std::string& records_path, const std::string& dataset_path);

}  // namespace attrbias
