#include "attrbias/biasmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attrbias/error.hpp"

namespace attrbias {

std::string_view to_string(Axis axis) {
  switch (axis) {
    case Axis::kTokenPosition: return "token_position";
    case Axis::kLexical: return "lexical";
    case Axis::kSentencePosition: return "sentence_position";
  }
  return "?";
}

Axis axis_from_string(std::string_view name) {
  for (Axis a : {Axis::kTokenPosition, Axis::kLexical, Axis::kSentencePosition}) {
    if (to_string(a) == name) return a;
  }
  throw UsageError("unknown axis: " + std::string(name));
}

BiasDistribution BiasDistribution::from_counts(Axis axis, std::vector<std::string> categories,
                                               std::vector<std::int64_t> counts) {
  if (categories.size() != counts.size()) throw DataError("category and count lengths differ");
  BiasDistribution d;
  d.axis = axis;
  d.categories = std::move(categories);
  d.counts = std::move(counts);
  for (auto c : d.counts) {
    if (c < 0) throw DataError("negative category count");
    d.support_count += c;
  }
  if (d.support_count == 0) throw DataError("empty record set: no top-k hits to distribute");
  d.probs.reserve(d.counts.size());
  for (auto c : d.counts) d.probs.push_back(static_cast<double>(c) / static_cast<double>(d.support_count));
  return d;
}

Baseline uniform_baseline(Axis axis, std::vector<std::string> categories) {
  if (categories.empty()) throw DataError("baseline needs at least one category");
  Baseline b;
  b.distribution.axis = axis;
  b.distribution.probs.assign(categories.size(), 1.0 / static_cast<double>(categories.size()));
  b.distribution.categories = std::move(categories);
  return b;
}

std::vector<std::string> axis_categories(Axis axis, const Dataset& dataset) {
  std::size_t n = 0;
  switch (axis) {
    case Axis::kTokenPosition:
      n = dataset.max_content_length();
      break;
    case Axis::kLexical:
      return dataset.vocab.tokens();
    case Axis::kSentencePosition:
      if (!dataset.has_sentence_boundaries()) {
        throw DataError("dataset '" + dataset.name + "' has no sentence boundaries");
      }
      for (const auto& in : dataset.instances) n = std::max(n, in.sentence_boundaries->size());
      break;
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

BiasDistribution build_distribution(std::span<const AttributionRecord> records, Axis axis,
                                    const Dataset& dataset, std::optional<int> class_filter) {
  auto categories = axis_categories(axis, dataset);
  std::vector<std::int64_t> counts(categories.size(), 0);
  for (const auto& r : records) {
    if (class_filter && r.predicted_class != *class_filter) continue;
    const Instance& in = dataset.find(r.instance_id);
    for (int t : r.topk) {
      if (t < 0 || static_cast<std::size_t>(t) >= in.token_ids.size()) {
        throw DataError("top-k index " + std::to_string(t) + " out of range for '" + r.instance_id + "'");
      }
      std::size_t cat = 0;
      switch (axis) {
        case Axis::kTokenPosition:
          cat = static_cast<std::size_t>(t);
          break;
        case Axis::kLexical:
          cat = static_cast<std::size_t>(in.token_ids[static_cast<std::size_t>(t)] - kNumSpecial);
          break;
        case Axis::kSentencePosition: {
          if (!in.sentence_boundaries) throw DataError("instance '" + in.id + "' has no sentence boundaries");
          const auto& sb = *in.sentence_boundaries;
          const auto it = std::find_if(sb.begin(), sb.end(), [&](const SentenceSpan& s) {
            return t >= s.start && t < s.end;
          });
          if (it == sb.end()) throw DataError("token outside every sentence in '" + in.id + "'");
          cat = static_cast<std::size_t>(it - sb.begin());
          break;
        }
      }
      ++counts[cat];
    }
  }
  return BiasDistribution::from_counts(axis, std::move(categories), std::move(counts));
}

double js_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("distributions have different category counts");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double tp = p[i] > 0.0 ? p[i] * std::log2(p[i] / m) : 0.0;
    const double tq = q[i] > 0.0 ? q[i] * std::log2(q[i] / m) : 0.0;
    sum += tp + tq;
  }
  return std::sqrt(std::clamp(0.5 * sum, 0.0, 1.0));
}

double js_distance(const BiasDistribution& p, const BiasDistribution& q) {
  if (p.axis != q.axis) throw DataError("distributions are on different axes");
  if (p.categories != q.categories) throw DataError("distributions have different categories");
  return js_distance(p.probs, q.probs);
}

double bias_cons(std::span<const BiasDistribution> per_seed) {
  if (per_seed.size() < 2) throw DataError("Bias-cons needs at least two seeds");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    for (std::size_t j = i + 1; j < per_seed.size(); ++j, ++pairs) sum += js_distance(per_seed[i], per_seed[j]);
  }
  return sum / static_cast<double>(pairs);
}

BiasDistribution aggregate(std::span<const BiasDistribution> per_seed) {
  if (per_seed.empty()) throw DataError("aggregation needs at least one distribution");
  std::vector<std::int64_t> counts(per_seed.front().categories.size(), 0);
  for (const auto& d : per_seed) {
    if (d.axis != per_seed.front().axis || d.categories != per_seed.front().categories) {
      throw DataError("cannot aggregate distributions over different categories");
    }
    if (d.counts.size() != counts.size()) throw DataError("distribution has no raw counts to aggregate");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += d.counts[i];
  }
  return BiasDistribution::from_counts(per_seed.front().axis, per_seed.front().categories, std::move(counts));
}

double bias_agg(std::span<const BiasDistribution> per_seed, const Baseline& baseline) {
  return js_distance(aggregate(per_seed), baseline.distribution);
}

double bias_attr(const std::map<Method, BiasDistribution>& by_method, Method target) {
  const auto it = by_method.find(target);
  if (it == by_method.end()) throw DataError("Bias-attr target " + std::string(to_string(target)) + " absent");
  if (by_method.size() < 2) throw DataError("Bias-attr needs at least two methods");
  double sum = 0.0;
  for (const auto& [m, d] : by_method) {
    if (m != target) sum += js_distance(it->second, d);
  }
  return sum / static_cast<double>(by_method.size() - 1);
}

}  // namespace attrbias
