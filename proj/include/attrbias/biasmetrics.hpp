#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrbias/attribution.hpp"
#include "attrbias/dataset.hpp"

namespace attrbias {

enum class Axis { kTokenPosition, kLexical, kSentencePosition };

std::string_view to_string(Axis axis);
Axis axis_from_string(std::string_view name);

struct BiasDistribution {
  Axis axis = Axis::kTokenPosition;
  std::vector<std::string> categories;
  std::vector<double> probs;
  std::vector<std::int64_t> counts;  // raw top-k hits; empty for baselines
  std::int64_t support_count = 0;

  // Normalizes `counts`; throws DataError when they sum to zero.
  static BiasDistribution from_counts(Axis axis, std::vector<std::string> categories,
                                      std::vector<std::int64_t> counts);
};

struct Baseline {
  BiasDistribution distribution;
};

Baseline uniform_baseline(Axis axis, std::vector<std::string> categories);

// Position: "0".."L-1" for the longest instance. Lexical: the content vocab in
// vocab order. Sentence position: "0".."S-1" for the most sentences.
std::vector<std::string> axis_categories(Axis axis, const Dataset& dataset);

// Tallies every top-k index of every record whose predicted class passes
// `class_filter`. Throws DataError when no record is left.
BiasDistribution build_distribution(std::span<const AttributionRecord> records, Axis axis,
                                    const Dataset& dataset,
                                    std::optional<int> class_filter = std::nullopt);

// Square root of the base-2 Jensen-Shannon divergence.
double js_distance(std::span<const double> p, std::span<const double> q);
double js_distance(const BiasDistribution& p, const BiasDistribution& q);

// Mean pairwise distance; needs at least two distributions.
double bias_cons(std::span<const BiasDistribution> per_seed);
// Sum of raw counts across seeds, renormalized.
BiasDistribution aggregate(std::span<const BiasDistribution> per_seed);
double bias_agg(std::span<const BiasDistribution> per_seed, const Baseline& baseline);
// Mean distance from `target` to every other method's distribution.
double bias_attr(const std::map<Method, BiasDistribution>& by_method, Method target);

}  // namespace attrbias
