#include "attrbias/faithfulness.hpp"

#include "attrbias/error.hpp"

namespace attrbias {

namespace {

std::vector<char> position_mask(const Instance& instance, std::span<const int> positions) {
  std::vector<char> hit(instance.token_ids.size(), 0);
  for (int p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= hit.size()) {
      throw DataError("position " + std::to_string(p) + " out of range for '" + instance.id + "'");
    }
    hit[static_cast<std::size_t>(p)] = 1;
  }
  return hit;
}

Erasure erase_where(const Instance& instance, const std::vector<char>& drop, CorruptionMode mode) {
  Erasure e;
  e.mode = mode;
  e.input = instance;
  e.input.token_ids.clear();
  e.original_boundaries = instance.sentence_boundaries;
  if (mode == CorruptionMode::kDelete) e.input.sentence_boundaries.reset();
  for (std::size_t i = 0; i < drop.size(); ++i) {
    if (!drop[i]) {
      e.input.token_ids.push_back(instance.token_ids[i]);
      e.kept.push_back(static_cast<int>(i));
    } else {
      e.removed.emplace_back(static_cast<int>(i), instance.token_ids[i]);
      if (mode == CorruptionMode::kMask) e.input.token_ids.push_back(kMaskId);
    }
  }
  return e;
}

double gold_prob(const ProbabilityModel& model, const Instance& in) {
  if (in.label != 0 && in.label != 1) throw DataError("instance '" + in.id + "' has no binary label");
  return predict_tokens(model, in.token_ids)[static_cast<std::size_t>(in.label)];
}

const Instance& rationale_source(const Dataset& dataset, const AttributionRecord& r) {
  if (r.topk.empty()) throw DataError("empty rationale for '" + r.instance_id + "'");
  return dataset.find(r.instance_id);
}

template <typename Corrupt>
double mean_drop(const ProbabilityModel& model, const Dataset& dataset,
                 std::span<const AttributionRecord> records, Corrupt corrupt) {
  if (records.empty()) throw DataError("faithfulness needs at least one record");
  double sum = 0.0;
  for (const auto& r : records) {
    const Instance& in = rationale_source(dataset, r);
    Instance reduced = corrupt(in, r.topk).input;
    reduced.label = in.label;
    sum += gold_prob(model, in) - gold_prob(model, reduced);
  }
  return sum / static_cast<double>(records.size());
}

}  // namespace

Erasure erase(const Instance& instance, std::span<const int> positions, CorruptionMode mode) {
  if (positions.empty()) throw UsageError("cannot erase an empty position set");
  return erase_where(instance, position_mask(instance, positions), mode);
}

Erasure keep_only(const Instance& instance, std::span<const int> keep, CorruptionMode mode) {
  if (keep.empty()) throw UsageError("rationale is empty");
  auto drop = position_mask(instance, keep);
  for (auto& d : drop) d = !d;
  return erase_where(instance, drop, mode);
}

Instance restore(const Erasure& erasure) {
  Instance out = erasure.input;
  const std::size_t n = erasure.kept.size() + erasure.removed.size();
  out.token_ids.assign(n, kPadId);
  for (std::size_t i = 0; i < erasure.kept.size(); ++i) {
    const auto pos = static_cast<std::size_t>(erasure.kept[i]);
    out.token_ids.at(pos) = erasure.input.token_ids.at(erasure.mode == CorruptionMode::kMask ? pos : i);
  }
  for (const auto& [pos, tok] : erasure.removed) out.token_ids.at(static_cast<std::size_t>(pos)) = tok;
  out.sentence_boundaries = erasure.original_boundaries;
  return out;
}

std::array<double, 2> predict_tokens(const ProbabilityModel& model, std::span<const TokenId> tokens) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kSeqStartId);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  ids.push_back(kSeqEndId);
  return model.predict_proba(ids);
}

double sufficiency(const ProbabilityModel& model, const Dataset& dataset,
                   std::span<const AttributionRecord> records, const FaithfulnessOptions& options) {
  if (options.sufficiency_reading == SufficiencyReading::kProse) {
    return comprehensiveness(model, dataset, records, options);
  }
  return mean_drop(model, dataset, records, [&](const Instance& in, std::span<const int> topk) {
    return keep_only(in, topk, options.corruption);
  });
}

double comprehensiveness(const ProbabilityModel& model, const Dataset& dataset,
                         std::span<const AttributionRecord> records,
                         const FaithfulnessOptions& options) {
  return mean_drop(model, dataset, records, [&](const Instance& in, std::span<const int> topk) {
    return erase(in, topk, options.corruption);
  });
}

FaithfulnessResult evaluate_faithfulness(const ProbabilityModel& model, const Dataset& dataset,
                                         std::span<const AttributionRecord> records,
                                         const FaithfulnessOptions& options) {
  if (records.empty()) throw DataError("faithfulness needs at least one record");
  FaithfulnessResult res;
  res.method = records.front().method;
  res.seed = records.front().seed;
  for (const auto& r : records) {
    if (r.method != res.method || r.seed != res.seed) {
      throw DataError("faithfulness records mix methods or seeds");
    }
  }
  res.suff = sufficiency(model, dataset, records, options);
  res.cmp = comprehensiveness(model, dataset, records, options);
  res.n = static_cast<int>(records.size());
  return res;
}

}  // namespace attrbias
