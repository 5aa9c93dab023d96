#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace attrbias {

using TokenId = std::int32_t;

// Special tokens occupy fixed ids 0..3; content tokens follow.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kSeqStartId = 1;
inline constexpr TokenId kSeqEndId = 2;
inline constexpr TokenId kMaskId = 3;
inline constexpr TokenId kNumSpecial = 4;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kSeqStartToken = "[CLS]";
inline constexpr std::string_view kSeqEndToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

// Version of the dataset and attribution-record interchange schemas.
inline constexpr std::string_view kSchemaVersion = "1.0";

class Vocab {
 public:
  Vocab() = default;
  // Throws DataError on duplicates or on collision with a special token.
  explicit Vocab(std::vector<std::string> content_tokens);

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t content_size() const { return tokens_.size(); }
  std::size_t size() const { return tokens_.size() + kNumSpecial; }

  std::optional<TokenId> find(std::string_view token) const;
  // Throws DataError for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::string& content_token(TokenId id) const;
  std::string surface(TokenId id) const;

  static bool is_special(std::string_view token);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct SentenceSpan {
  int start = 0;  // inclusive, content-token index
  int end = 0;    // exclusive
  bool operator==(const SentenceSpan&) const = default;
};

struct Instance {
  std::string id;
  std::vector<TokenId> token_ids;  // content only, no sequence markers
  int label = 0;
  std::optional<std::string> group_id;
  std::optional<std::vector<SentenceSpan>> sentence_boundaries;

  bool operator==(const Instance&) const = default;
};

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct Dataset {
  std::string name;
  Vocab vocab;
  std::vector<Instance> instances;
  std::vector<Split> splits;  // parallel to instances

  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const;
  bool has_sentence_boundaries() const;
  // Instance lookup by id; throws DataError when absent.
  const Instance& find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::size_t max_content_length() const;

  // Rebuilds the id index; call after mutating `instances`.
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> id_index_;
};

// JSONL body (one instance per line) plus a JSON header sidecar holding
// {schema_version, name, vocab, splits}.
struct SerializedDataset {
  std::string header;
  std::string jsonl;
};

SerializedDataset serialize(const Dataset& dataset);
Dataset deserialize(const std::string& header, const std::string& jsonl);

// `path` is the JSONL file; the header lives at `<stem>.header.json`.
std::string header_path_for(const std::string& jsonl_path);
void save_dataset(const Dataset& dataset, const std::string& jsonl_path);
Dataset load_dataset(const std::string& jsonl_path);

// Word-level tokenizer: splits on whitespace and separates punctuation
// characters into their own tokens.
std::vector<std::string> tokenize_words(std::string_view text);

}  // namespace attrbias
