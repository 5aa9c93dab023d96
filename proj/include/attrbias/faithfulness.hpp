#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "attrbias/attribution.hpp"
#include "attrbias/dataset.hpp"
#include "attrbias/toymodel.hpp"

namespace attrbias {

enum class CorruptionMode { kDelete, kMask };

// kFormula scores sufficiency on the rationale alone; kProse scores it on the
// input with the rationale removed.
enum class SufficiencyReading { kFormula, kProse };

struct FaithfulnessOptions {
  CorruptionMode corruption = CorruptionMode::kDelete;
  SufficiencyReading sufficiency_reading = SufficiencyReading::kFormula;
};

struct FaithfulnessResult {
  Method method = Method::kVanGrad;
  std::uint64_t seed = 0;
  double suff = 0.0;
  double cmp = 0.0;
  int n = 0;
};

// Result of erasing a set of content positions, with what was taken out.
struct Erasure {
  Instance input;
  CorruptionMode mode = CorruptionMode::kDelete;
  std::vector<int> kept;                         // original indices, ascending
  std::vector<std::pair<int, TokenId>> removed;  // (original index, token)
  std::optional<std::vector<SentenceSpan>> original_boundaries;
};

// Throws UsageError when `positions` is empty; DataError when out of range.
Erasure erase(const Instance& instance, std::span<const int> positions, CorruptionMode mode);
// Erases every position not in `keep`.
Erasure keep_only(const Instance& instance, std::span<const int> keep, CorruptionMode mode);
// Rebuilds the uncorrupted instance from the erasure alone.
Instance restore(const Erasure& erasure);

// Probabilities on [CLS] tokens [SEP]; an empty token list is allowed.
std::array<double, 2> predict_tokens(const ProbabilityModel& model, std::span<const TokenId> tokens);

// Means over records of p_j(x) - p_j(corrupted x) with j the gold label.
double sufficiency(const ProbabilityModel& model, const Dataset& dataset,
                   std::span<const AttributionRecord> records, const FaithfulnessOptions& options = {});
double comprehensiveness(const ProbabilityModel& model, const Dataset& dataset,
                         std::span<const AttributionRecord> records,
                         const FaithfulnessOptions& options = {});

// Records must share one method and seed.
FaithfulnessResult evaluate_faithfulness(const ProbabilityModel& model, const Dataset& dataset,
                                         std::span<const AttributionRecord> records,
                                         const FaithfulnessOptions& options = {});

}  // namespace attrbias
