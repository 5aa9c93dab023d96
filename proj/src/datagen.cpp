#include "attrbias/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "attrbias/error.hpp"
#include "attrbias/rng.hpp"

namespace attrbias {
namespace {

// Stream tags keep datasets generated from the same seed independent.
constexpr std::uint64_t kStreamNounDetPeriod = 0x6e64700000000001ULL;
constexpr std::uint64_t kStreamPeriodComma = 0x7063000000000002ULL;
constexpr std::uint64_t kStreamUniquePunct = 0x7570000000000003ULL;
constexpr std::uint64_t kStreamCorpus = 0x636f727000000004ULL;
constexpr std::uint64_t kStreamCausal = 0x6361757300000005ULL;

std::string instance_id(std::string_view dataset, Split split, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return std::string(dataset) + "-" + std::string(to_string(split)) + "-" + buf;
}

std::vector<int> balanced_labels(std::size_t n, Rng& rng) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  rng.shuffle(std::span<int>(labels));
  return labels;
}

template <typename MakeTokens>
Dataset build_artificial(std::string_view name, std::vector<std::string> vocab_tokens,
                         std::uint64_t seed, std::uint64_t stream,
                         MakeTokens&& make_tokens) {
  Dataset ds;
  ds.name = std::string(name);
  ds.vocab = Vocab(std::move(vocab_tokens));
  Rng rng(seed, stream);
  const std::array<std::pair<Split, std::size_t>, 3> plan{{
      {Split::kTrain, kArtificialTrain},
      {Split::kValidation, kArtificialValidation},
      {Split::kTest, kArtificialTest},
  }};
  for (const auto& [split, n] : plan) {
    const auto labels = balanced_labels(n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      Instance inst;
      inst.id = instance_id(name, split, i);
      inst.token_ids = make_tokens(rng);
      inst.label = labels[i];
      ds.instances.push_back(std::move(inst));
      ds.splits.push_back(split);
    }
  }
  ds.reindex();
  return ds;
}

Dataset uniform_positions(std::string_view name, std::vector<std::string> tokens,
                          std::uint64_t seed, std::uint64_t stream) {
  const auto k = tokens.size();
  return build_artificial(name, std::move(tokens), seed, stream, [k](Rng& rng) {
    std::vector<TokenId> ids(kArtificialLength);
    for (auto& id : ids) id = static_cast<TokenId>(rng.uniform_index(k)) + kNumSpecial;
    return ids;
  });
}

}  // namespace

const std::vector<std::string>& unique_punctuation_marks() {
  static const std::vector<std::string> marks{
      ".", ",", ";", ":", "!", "?", "-", "_", "(", ")",
      "[", "]", "{", "}", "/", "*", "#", "'", "\"", "`"};
  return marks;
}

Dataset gen_noun_det_period(std::uint64_t seed) {
  return uniform_positions(kNounDetPeriod, {"table", "the", "."}, seed,
                           kStreamNounDetPeriod);
}

Dataset gen_period_comma(std::uint64_t seed) {
  return uniform_positions(kPeriodComma, {".", ","}, seed, kStreamPeriodComma);
}

Dataset gen_unique_punct(std::uint64_t seed) {
  const auto& marks = unique_punctuation_marks();
  return build_artificial(kUniquePunctuation, marks, seed, kStreamUniquePunct,
                          [n = marks.size()](Rng& rng) {
                            std::vector<TokenId> ids(n);
                            for (std::size_t i = 0; i < n; ++i) {
                              ids[i] = static_cast<TokenId>(i) + kNumSpecial;
                            }
                            rng.shuffle(std::span<TokenId>(ids));
                            return ids;
                          });
}

Dataset gen_artificial(std::string_view name, std::uint64_t seed) {
  if (name == kNounDetPeriod) return gen_noun_det_period(seed);
  if (name == kPeriodComma) return gen_period_comma(seed);
  if (name == kUniquePunctuation) return gen_unique_punct(seed);
  throw UsageError("unknown artificial dataset: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Causal corpus

const std::vector<std::string>& causal_marker_lexicon() {
  static const std::vector<std::string> lexicon{
      "causes",     "caused",      "cause",         "leads to",    "led to",
      "results in", "resulted in", "because",       "because of",  "due to",
      "as a result of", "depends on", "depend on",  "triggers",    "triggered",
      "produces",   "increases",   "reduces",       "influences",  "weakens",
      "therefore",  "consequently", "thus"};
  return lexicon;
}

namespace {

std::vector<std::vector<std::string>> split_lexicon() {
  std::vector<std::vector<std::string>> phrases;
  for (const auto& p : causal_marker_lexicon()) {
    std::istringstream in(p);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    phrases.push_back(std::move(words));
  }
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return phrases;
}

// Filler words share no word with any marker phrase.
const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{
      "the", "this", "that", "these", "those", "its", "their", "our", "some",
      "many", "most", "several", "every", "with", "for", "at", "by", "from",
      "and", "or", "but", "while", "when", "also", "still", "often", "near",
      "climate", "emissions", "temperature", "atmosphere", "energy", "carbon",
      "ocean", "forest", "policy", "regime", "government", "leaders", "moscow",
      "conference", "crisis", "tensions", "generals", "transition", "traffic",
      "congestion", "roads", "travel", "times", "drivers", "commuters", "city",
      "capacity", "network", "report", "analysis", "scientists", "people",
      "agency", "ideas", "period", "rates", "levels", "concentrations",
      "current", "new", "large", "small", "recent", "global", "local", "public",
      "political", "economic", "individual", "annual", "average", "major",
      "is", "are", "was", "were", "remains", "appears", "includes", "contains",
      "describes", "mentions", "shows", "follows", "discusses", "considers",
      "reports", "lists", "notes", "shares", "meets", "visits", "holds"};
  return words;
}

int sample_length(Rng& rng, double mean, int lo, int hi) {
  constexpr double kSigma = 0.45;
  const double mu = std::log(mean) - 0.5 * kSigma * kSigma;
  const double draw = std::exp(mu + kSigma * rng.normal());
  return std::clamp(static_cast<int>(std::lround(draw)), lo, hi);
}

}  // namespace

int count_causal_markers(std::span<const std::string> words) {
  static const auto phrases = split_lexicon();
  int count = 0;
  std::size_t i = 0;
  while (i < words.size()) {
    bool matched = false;
    for (const auto& phrase : phrases) {
      if (i + phrase.size() > words.size()) continue;
      if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
        ++count;
        i += phrase.size();
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return count;
}

Corpus gen_synthetic_causal_corpus(std::uint64_t seed, int n_pos, int n_neg) {
  if (n_pos < 1 || n_neg < 1) {
    throw UsageError("synthetic corpus needs n_pos >= 1 and n_neg >= 1");
  }
  constexpr double kPositiveMeanWords = 24.6;
  constexpr double kNegativeMeanWords = 18.4;
  constexpr int kMinWords = 6;
  constexpr int kMaxWords = 60;

  Rng rng(seed, kStreamCorpus);
  const auto& fill = filler_words();
  const auto& lexicon = causal_marker_lexicon();
  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(n_pos + n_neg));

  auto make = [&](bool causal) {
    const double mean = causal ? kPositiveMeanWords : kNegativeMeanWords;
    const int total = sample_length(rng, mean, kMinWords, kMaxWords);
    std::vector<std::string> words;
    if (causal) {
      const auto& marker = lexicon[rng.uniform_index(lexicon.size())];
      std::istringstream in(marker);
      std::vector<std::string> marker_words;
      for (std::string w; in >> w;) marker_words.push_back(w);
      const int n_fill = std::max(0, total - static_cast<int>(marker_words.size()));
      for (int i = 0; i < n_fill; ++i) words.push_back(fill[rng.uniform_index(fill.size())]);
      const auto at = static_cast<std::ptrdiff_t>(rng.uniform_index(words.size() + 1));
      words.insert(words.begin() + at, marker_words.begin(), marker_words.end());
    } else {
      for (int i = 0; i < total; ++i) words.push_back(fill[rng.uniform_index(fill.size())]);
    }
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) text += ' ';
      text += words[i];
    }
    text += '.';
    return LabeledSentence{std::move(text), causal};
  };

  // Interleave classes so a prefix of the corpus stays roughly balanced.
  int pos = 0, neg = 0;
  while (pos < n_pos || neg < n_neg) {
    if (pos < n_pos) {
      corpus.push_back(make(true));
      ++pos;
    }
    if (neg < n_neg) {
      corpus.push_back(make(false));
      ++neg;
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Causal permutation dataset

Dataset build_causal_dataset(const Corpus& corpus, std::uint64_t seed,
                             const CausalDesign& design) {
  std::vector<std::vector<std::string>> pos_sent, neg_sent;
  for (const auto& s : corpus) {
    auto words = tokenize_words(s.text);
    if (words.empty()) continue;
    (s.causal ? pos_sent : neg_sent).push_back(std::move(words));
  }
  const auto have_pos = static_cast<int>(pos_sent.size());
  const auto have_neg = static_cast<int>(neg_sent.size());
  if (have_pos < design.min_per_class || have_neg < design.min_per_class) {
    std::string msg = "causal corpus too small: need at least " +
                      std::to_string(design.min_per_class) +
                      " causal and non-causal sentences each;";
    if (have_pos < design.min_per_class) {
      msg += " causal short by " + std::to_string(design.min_per_class - have_pos) +
             " (have " + std::to_string(have_pos) + ");";
    }
    if (have_neg < design.min_per_class) {
      msg += " non-causal short by " + std::to_string(design.min_per_class - have_neg) +
             " (have " + std::to_string(have_neg) + ");";
    }
    throw DataError(msg);
  }

  Rng rng(seed, kStreamCausal);

  struct Pools {
    std::vector<std::size_t> train, test;
  };
  auto make_pools = [&](std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_test = std::max<std::size_t>(
        3, static_cast<std::size_t>(std::llround(design.test_pool_fraction * static_cast<double>(n))));
    Pools p;
    p.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    p.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    return p;
  };
  const Pools pos_pools = make_pools(pos_sent.size());
  const Pools neg_pools = make_pools(neg_sent.size());

  auto sample_triple = [&](const std::vector<std::size_t>& pool) {
    std::array<std::size_t, 3> t{};
    for (int k = 0; k < 3; ++k) {
      std::size_t pick;
      do {
        pick = pool[rng.uniform_index(pool.size())];
      } while (std::find(t.begin(), t.begin() + k, pick) != t.begin() + k);
      t[static_cast<std::size_t>(k)] = pick;
    }
    return t;
  };

  struct Triple {
    Split split;
    bool causal;
    std::array<std::size_t, 3> sentences;
  };
  std::vector<Triple> triples;
  for (auto [split, n] : {std::pair{Split::kTrain, design.train_triples},
                          std::pair{Split::kTest, design.test_triples}}) {
    for (int i = 0; i < n; ++i) {
      // Alternate so each split is half +++ and half ---.
      const bool causal = (i % 2) == 0;
      const auto& pools = causal ? pos_pools : neg_pools;
      triples.push_back({split, causal,
                         sample_triple(split == Split::kTrain ? pools.train : pools.test)});
    }
  }

  std::set<std::string> used_words;
  for (const auto& t : triples) {
    const auto& src = t.causal ? pos_sent : neg_sent;
    for (auto s : t.sentences) used_words.insert(src[s].begin(), src[s].end());
  }
  Dataset ds;
  ds.name = std::string(kCausal);
  ds.vocab = Vocab(std::vector<std::string>(used_words.begin(), used_words.end()));

  std::array<int, 2> group_counter{0, 0};
  for (const auto& t : triples) {
    const auto& src = t.causal ? pos_sent : neg_sent;
    const int g = group_counter[t.split == Split::kTrain ? 0 : 1]++;
    char gbuf[16];
    std::snprintf(gbuf, sizeof gbuf, "g%04d", g);
    const std::string group = std::string(kCausal) + "-" + std::string(to_string(t.split)) + "-" + gbuf;
    std::array<int, 3> order{0, 1, 2};
    int p = 0;
    do {
      Instance inst;
      inst.id = group + "-p" + std::to_string(p++);
      inst.group_id = group;
      inst.label = t.causal ? 1 : 0;
      std::vector<SentenceSpan> spans;
      for (int o : order) {
        const auto& words = src[t.sentences[static_cast<std::size_t>(o)]];
        const int start = static_cast<int>(inst.token_ids.size());
        for (const auto& w : words) inst.token_ids.push_back(ds.vocab.id(w));
        spans.push_back({start, static_cast<int>(inst.token_ids.size())});
      }
      inst.sentence_boundaries = std::move(spans);
      ds.instances.push_back(std::move(inst));
      ds.splits.push_back(t.split);
    } while (std::next_permutation(order.begin(), order.end()));
  }
  ds.reindex();
  return ds;
}

Corpus parse_corpus(const std::string& jsonl) {
  Corpus corpus;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      const auto label = obj.at("label").get<std::string>();
      if (label != "causal" && label != "non-causal") {
        throw DataError("label must be \"causal\" or \"non-causal\"");
      }
      corpus.push_back({obj.at("text").get<std::string>(), label == "causal"});
    } catch (const std::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus) {
    out += nlohmann::json{{"text", s.text}, {"label", s.causal ? "causal" : "non-causal"}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace attrbias
