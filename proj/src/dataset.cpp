#include "attrbias/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "attrbias/error.hpp"

namespace attrbias {

using nlohmann::json;

Vocab::Vocab(std::vector<std::string> content_tokens)
    : tokens_(std::move(content_tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& tok = tokens_[i];
    if (is_special(tok)) {
      throw DataError("content token collides with special token: " + tok);
    }
    const auto id = static_cast<TokenId>(i) + kNumSpecial;
    if (!index_.emplace(tok, id).second) {
      throw DataError("duplicate vocabulary token: " + tok);
    }
  }
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  if (token == kPadToken) return kPadId;
  if (token == kSeqStartToken) return kSeqStartId;
  if (token == kSeqEndToken) return kSeqEndId;
  if (token == kMaskToken) return kMaskId;
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw DataError("unknown token: '" + std::string(token) + "'");
  return *found;
}

const std::string& Vocab::content_token(TokenId id) const {
  if (id < kNumSpecial || static_cast<std::size_t>(id) >= size()) {
    throw DataError("not a content token id: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id - kNumSpecial)];
}

std::string Vocab::surface(TokenId id) const {
  switch (id) {
    case kPadId: return std::string(kPadToken);
    case kSeqStartId: return std::string(kSeqStartToken);
    case kSeqEndId: return std::string(kSeqEndToken);
    case kMaskId: return std::string(kMaskToken);
    default: return content_token(id);
  }
}

bool Vocab::is_special(std::string_view token) {
  return token == kPadToken || token == kSeqStartToken ||
         token == kSeqEndToken || token == kMaskToken;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split: " + std::string(name));
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), split));
}

bool Dataset::has_sentence_boundaries() const {
  return !instances.empty() &&
         std::all_of(instances.begin(), instances.end(), [](const Instance& in) {
           return in.sentence_boundaries.has_value();
         });
}

void Dataset::reindex() {
  id_index_.clear();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!id_index_.emplace(instances[i].id, i).second) {
      throw DataError("duplicate instance id: " + instances[i].id);
    }
  }
}

std::optional<std::size_t> Dataset::index_of(std::string_view id) const {
  if (id_index_.size() != instances.size()) {
    // Stale index: fall back to a scan rather than mutating shared state.
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances[i].id == id) return i;
    }
    return std::nullopt;
  }
  auto it = id_index_.find(std::string(id));
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

const Instance& Dataset::find(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw DataError("unknown instance_id: " + std::string(id));
  return instances[*idx];
}

std::size_t Dataset::max_content_length() const {
  std::size_t n = 0;
  for (const auto& in : instances) n = std::max(n, in.token_ids.size());
  return n;
}

SerializedDataset serialize(const Dataset& dataset) {
  if (dataset.splits.size() != dataset.instances.size()) {
    throw DataError("dataset split tags do not match instance count");
  }
  json splits = json::object();
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    json ids = json::array();
    for (std::size_t i : dataset.indices(s)) ids.push_back(dataset.instances[i].id);
    splits[std::string(to_string(s))] = std::move(ids);
  }
  json header = {
      {"schema_version", kSchemaVersion},
      {"name", dataset.name},
      {"vocab",
       {{"tokens", dataset.vocab.tokens()},
        {"special_tokens",
         {{"seq_start", kSeqStartToken},
          {"seq_end", kSeqEndToken},
          {"pad", kPadToken},
          {"mask", kMaskToken}}}}},
      {"splits", std::move(splits)},
  };

  std::string body;
  for (const auto& in : dataset.instances) {
    json line = json::object();
    line["id"] = in.id;
    json toks = json::array();
    for (TokenId t : in.token_ids) toks.push_back(dataset.vocab.surface(t));
    line["tokens"] = std::move(toks);
    line["label"] = in.label;
    if (in.group_id) line["group_id"] = *in.group_id;
    if (in.sentence_boundaries) {
      json sb = json::array();
      for (const auto& s : *in.sentence_boundaries) sb.push_back({s.start, s.end});
      line["sentence_boundaries"] = std::move(sb);
    }
    body += line.dump();
    body += '\n';
  }
  return {header.dump(2) + "\n", std::move(body)};
}

namespace {

std::string line_error(std::size_t line_no, const std::string& what) {
  return "dataset line " + std::to_string(line_no) + ": " + what;
}

}  // namespace

Dataset deserialize(const std::string& header_text, const std::string& jsonl) {
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset header is not valid JSON: ") + e.what());
  }
  Dataset ds;
  try {
    ds.name = header.at("name").get<std::string>();
    ds.vocab = Vocab(header.at("vocab").at("tokens").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset header: ") + e.what());
  }
  std::unordered_map<std::string, Split> split_of;
  if (header.contains("splits")) {
    for (auto& [name, ids] : header["splits"].items()) {
      const Split s = split_from_string(name);
      for (const auto& id : ids) split_of[id.get<std::string>()] = s;
    }
  }

  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(line_error(line_no, std::string("invalid JSON: ") + e.what()));
    }
    Instance inst;
    try {
      inst.id = obj.at("id").get<std::string>();
      for (const auto& t : obj.at("tokens")) {
        const auto tok = t.get<std::string>();
        const auto id = ds.vocab.find(tok);
        if (!id || *id < kNumSpecial) {
          throw DataError(line_error(line_no, "token not in content vocab: '" + tok + "'"));
        }
        inst.token_ids.push_back(*id);
      }
      inst.label = obj.at("label").get<int>();
      if (obj.contains("group_id") && !obj["group_id"].is_null()) {
        inst.group_id = obj["group_id"].get<std::string>();
      }
      if (obj.contains("sentence_boundaries") && !obj["sentence_boundaries"].is_null()) {
        std::vector<SentenceSpan> spans;
        for (const auto& s : obj["sentence_boundaries"]) {
          spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
        }
        inst.sentence_boundaries = std::move(spans);
      }
    } catch (const json::exception& e) {
      throw DataError(line_error(line_no, e.what()));
    }
    if (inst.label != 0 && inst.label != 1) {
      throw DataError(line_error(line_no, "label must be 0 or 1"));
    }
    if (inst.sentence_boundaries) {
      int expect = 0;
      for (const auto& s : *inst.sentence_boundaries) {
        if (s.start != expect || s.end <= s.start) {
          throw DataError(line_error(line_no, "sentence boundaries must tile the tokens"));
        }
        expect = s.end;
      }
      if (expect != static_cast<int>(inst.token_ids.size())) {
        throw DataError(line_error(line_no, "sentence boundaries must cover all tokens"));
      }
    }
    auto it = split_of.find(inst.id);
    ds.splits.push_back(it == split_of.end() ? Split::kTest : it->second);
    ds.instances.push_back(std::move(inst));
  }
  ds.reindex();
  return ds;
}

std::string header_path_for(const std::string& jsonl_path) {
  std::filesystem::path p(jsonl_path);
  auto stem = p.stem().string();
  return (p.parent_path() / (stem + ".header.json")).string();
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& jsonl_path) {
  auto s = serialize(dataset);
  const std::filesystem::path p(jsonl_path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_file(header_path_for(jsonl_path), s.header);
  write_file(jsonl_path, s.jsonl);
}

Dataset load_dataset(const std::string& jsonl_path) {
  return deserialize(read_file(header_path_for(jsonl_path)), read_file(jsonl_path));
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c) && ch != '\'' && ch != '-') {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

}  // namespace attrbias
