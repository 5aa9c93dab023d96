#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrbias/dataset.hpp"

namespace attrbias {

inline constexpr std::size_t kArtificialLength = 20;
inline constexpr std::size_t kArtificialTrain = 8000;
inline constexpr std::size_t kArtificialValidation = 1000;
inline constexpr std::size_t kArtificialTest = 1000;

inline constexpr std::string_view kNounDetPeriod = "noun-det-period";
inline constexpr std::string_view kPeriodComma = "period-comma";
inline constexpr std::string_view kUniquePunctuation = "unique-punctuation";
inline constexpr std::string_view kCausal = "causal";

// The twenty marks of the unique-punctuation dataset, in canonical order.
const std::vector<std::string>& unique_punctuation_marks();

// Every position is drawn uniformly from {"table", "the", "."}; labels are
// balanced within each split and independent of the tokens.
Dataset gen_noun_det_period(std::uint64_t seed);
// Every position is drawn uniformly from {".", ","}.
Dataset gen_period_comma(std::uint64_t seed);
// Each instance is a uniformly random permutation of the twenty marks.
Dataset gen_unique_punct(std::uint64_t seed);

// Dispatches on one of the three artificial dataset names.
Dataset gen_artificial(std::string_view name, std::uint64_t seed);

struct LabeledSentence {
  std::string text;
  bool causal = false;
  bool operator==(const LabeledSentence&) const = default;
};

using Corpus = std::vector<LabeledSentence>;

// Marker phrases, each a whitespace-separated word sequence.
const std::vector<std::string>& causal_marker_lexicon();

// Number of non-overlapping lexicon phrases in a word sequence, matched
// longest-first from left to right.
int count_causal_markers(std::span<const std::string> words);

// Template sentences: positives carry exactly one marker phrase, negatives
// none. Word counts are clamped to [6, 60].
Corpus gen_synthetic_causal_corpus(std::uint64_t seed, int n_pos, int n_neg);

struct CausalDesign {
  int train_triples = 900;
  int test_triples = 100;
  int min_per_class = 1000;
  double test_pool_fraction = 0.1;
};

// Samples same-label sentence triples from disjoint train/test pools and
// expands each into its six orderings. Throws DataError when the corpus has
// fewer sentences per class than `design.min_per_class`.
Dataset build_causal_dataset(const Corpus& corpus, std::uint64_t seed,
                             const CausalDesign& design = {});

// Reads JSONL lines {text, label: "causal" | "non-causal"}.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(const std::string& jsonl);
std::string serialize_corpus(const Corpus& corpus);

}  // namespace attrbias
