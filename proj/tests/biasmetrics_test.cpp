#include "attrbias/biasmetrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attrbias/error.hpp"
#include "test_util.hpp"

namespace attrbias {
namespace {

// Entropy form, natural log: JSD = H(m) - (H(p) + H(q)) / 2.
double oracle_js(const std::vector<double>& p, const std::vector<double>& q) {
  auto h = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
      if (x > 0) s -= x * std::log(x);
    }
    return s;
  };
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = (p[i] + q[i]) / 2;
  const double jsd = (h(m) - 0.5 * (h(p) + h(q))) / std::log(2.0);
  return std::sqrt(std::max(jsd, 0.0));
}

std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

std::vector<std::int64_t> random_counts(Rng& rng, std::size_t n, bool sparse) {
  std::vector<std::int64_t> c(n);
  for (auto& x : c) x = static_cast<std::int64_t>(rng.uniform_index(50));
  if (sparse) {
    for (auto& x : c) {
      if (rng.uniform01() < 0.4) x = 0;
    }
  }
  c[rng.uniform_index(n)] += 1;
  return c;
}

BiasDistribution random_dist(Rng& rng, std::size_t n, bool sparse = true) {
  return BiasDistribution::from_counts(Axis::kTokenPosition, labels(n), random_counts(rng, n, sparse));
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += x = rng.uniform01() < 0.25 ? 0.0 : -std::log(1.0 - rng.uniform01());
  if (s == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= s;
  return v;
}

// ---------------------------------------------------------------------------

TEST(JsDistance, FixedValues) {
  const std::vector<double> a{0.5, 0.5}, b{0.25, 0.75}, e0{1.0, 0.0}, e1{0.0, 1.0};
  EXPECT_EQ(js_distance(a, a), 0.0);
  EXPECT_NEAR(js_distance(e0, e1), 1.0, 1e-15);
  // scipy.spatial.distance.jensenshannon(a, b, base=2)
  EXPECT_NEAR(js_distance(a, b), 0.22089576884901735, 1e-15);
  EXPECT_NEAR(js_distance(a, b), oracle_js(a, b), 1e-12);
  EXPECT_THROW(js_distance(a, std::vector<double>{1.0}), DataError);
}

// 2000 random triples over 2..30 categories, a quarter of entries zero.
TEST(JsDistance, MetricAxioms) {
  Rng rng(2024);
  int violations = 0;
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(29);
    const auto p = random_simplex(rng, n), q = random_simplex(rng, n), r = random_simplex(rng, n);
    const double pq = js_distance(p, q), qp = js_distance(q, p);
    const double pr = js_distance(p, r), qr = js_distance(q, r);
    if (pq != qp) ++violations;
    if (js_distance(p, p) != 0.0) ++violations;
    if (p != q && !(pq > 0.0)) ++violations;
    if (pr > pq + qr + 1e-12) ++violations;
    if (pq < 0.0 || pq > 1.0) ++violations;
    worst_oracle = std::max(worst_oracle, std::abs(pq - oracle_js(p, q)));
  }
  EXPECT_EQ(violations, 0);
  EXPECT_LE(worst_oracle, 1e-12);
}

TEST(JsDistance, RejectsMismatchedCategories) {
  Rng rng(1);
  const auto a = random_dist(rng, 4);
  auto b = random_dist(rng, 4);
  b.categories[2] = "x";
  EXPECT_THROW(js_distance(a, b), DataError);
  auto c = a;
  c.axis = Axis::kLexical;
  EXPECT_THROW(js_distance(a, c), DataError);
}

TEST(BiasCons, MatchesOrderedPairOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t seeds = 2 + rng.uniform_index(9), n = 2 + rng.uniform_index(20);
    std::vector<BiasDistribution> ds;
    for (std::size_t s = 0; s < seeds; ++s) ds.push_back(random_dist(rng, n));
    double sum = 0.0;
    for (std::size_t i = 0; i < seeds; ++i) {
      for (std::size_t j = 0; j < seeds; ++j) {
        if (i != j) sum += oracle_js(ds[i].probs, ds[j].probs);
      }
    }
    const double cons = bias_cons(ds);
    EXPECT_NEAR(cons, sum / (seeds * (seeds - 1)), 1e-12);
    std::reverse(ds.begin(), ds.end());
    std::rotate(ds.begin(), ds.begin() + 1, ds.end());
    EXPECT_NEAR(bias_cons(ds), cons, 1e-12);
  }
}

TEST(BiasCons, EdgeCases) {
  Rng rng(3);
  const auto d = random_dist(rng, 6);
  EXPECT_EQ(bias_cons(std::vector<BiasDistribution>(10, d)), 0.0);
  const auto e0 = BiasDistribution::from_counts(Axis::kTokenPosition, labels(2), {5, 0});
  const auto e1 = BiasDistribution::from_counts(Axis::kTokenPosition, labels(2), {0, 7});
  EXPECT_NEAR(bias_cons(std::vector{e0, e1}), 1.0, 1e-15);
  EXPECT_THROW(bias_cons(std::vector{d}), DataError);
}

TEST(BiasAgg, SumsRawCountsAcrossSeeds) {
  const auto a = BiasDistribution::from_counts(Axis::kTokenPosition, labels(3), {100, 0, 0});
  const auto b = BiasDistribution::from_counts(Axis::kTokenPosition, labels(3), {0, 150, 150});
  const auto agg = aggregate(std::vector{a, b});
  EXPECT_EQ(agg.support_count, 400);
  EXPECT_DOUBLE_EQ(agg.probs[0], 0.25);
  EXPECT_DOUBLE_EQ(agg.probs[1], 0.375);
  const auto base = uniform_baseline(Axis::kTokenPosition, labels(3));
  EXPECT_NEAR(bias_agg(std::vector{a, b}, base), oracle_js({0.25, 0.375, 0.375}, base.distribution.probs), 1e-12);
}

TEST(BiasAgg, MatchesOracleOnRandomInputs) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t seeds = 1 + rng.uniform_index(10), n = 2 + rng.uniform_index(25);
    std::vector<BiasDistribution> ds;
    std::vector<double> total(n, 0.0);
    double support = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      ds.push_back(random_dist(rng, n));
      for (std::size_t i = 0; i < n; ++i) total[i] += static_cast<double>(ds.back().counts[i]);
      support += static_cast<double>(ds.back().support_count);
    }
    for (auto& t : total) t /= support;
    const auto base = uniform_baseline(Axis::kTokenPosition, labels(n));
    EXPECT_NEAR(bias_agg(ds, base), oracle_js(total, base.distribution.probs), 1e-12);
    if (seeds == 1) EXPECT_EQ(bias_agg(ds, base), js_distance(ds[0], base.distribution));
  }
}

TEST(BiasAgg, UniformAggregateIsZeroAndPointMassMatchesClosedForm) {
  const auto base = uniform_baseline(Axis::kTokenPosition, labels(20));
  const auto flat = BiasDistribution::from_counts(Axis::kTokenPosition, labels(20),
                                                  std::vector<std::int64_t>(20, 3));
  EXPECT_EQ(bias_agg(std::vector{flat}, base), 0.0);
  std::vector<std::int64_t> point(20, 0);
  point[0] = 1000;
  const auto mass = BiasDistribution::from_counts(Axis::kTokenPosition, labels(20), point);
  // JSD = 1/2 [log2(1/0.525)] + 1/2 [0.05 log2(0.05/0.525) + 0.95 log2(2)]
  const double jsd = 0.5 * std::log2(1 / 0.525) + 0.5 * (0.05 * std::log2(0.05 / 0.525) + 0.95);
  EXPECT_NEAR(bias_agg(std::vector{mass}, base), std::sqrt(jsd), 1e-12);
  EXPECT_NEAR(std::sqrt(jsd), 0.924660694787462, 1e-12);
  const auto wrong = uniform_baseline(Axis::kTokenPosition, labels(19));
  EXPECT_THROW(bias_agg(std::vector{mass}, wrong), DataError);
}

TEST(BiasAttr, MatchesPairwiseOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(20);
    std::map<Method, BiasDistribution> by;
    for (Method m : all_methods()) by[m] = random_dist(rng, n);
    for (Method target : all_methods()) {
      double sum = 0.0;
      for (Method other : all_methods()) {
        if (other != target) sum += oracle_js(by[target].probs, by[other].probs);
      }
      const double v = bias_attr(by, target);
      EXPECT_NEAR(v, sum / 5.0, 1e-12);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(BiasAttr, EdgeCases) {
  Rng rng(2);
  const auto a = random_dist(rng, 5), b = random_dist(rng, 5);
  std::map<Method, BiasDistribution> two{{Method::kLime, a}, {Method::kVanGrad, b}};
  EXPECT_EQ(bias_attr(two, Method::kLime), js_distance(a, b));
  EXPECT_EQ(bias_attr(two, Method::kVanGrad), js_distance(a, b));
  std::map<Method, BiasDistribution> same;
  for (Method m : all_methods()) same[m] = a;
  for (Method m : all_methods()) EXPECT_EQ(bias_attr(same, m), 0.0);
  EXPECT_THROW(bias_attr(two, Method::kIntGrad), DataError);
  EXPECT_THROW(bias_attr({{Method::kLime, a}}, Method::kLime), DataError);
}

TEST(Metrics, InvariantUnderCategoryRelabeling) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(15);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    auto permute = [&](const BiasDistribution& d) {
      std::vector<std::int64_t> c(n);
      for (std::size_t i = 0; i < n; ++i) c[perm[i]] = d.counts[i];
      return BiasDistribution::from_counts(d.axis, d.categories, c);
    };
    std::vector<BiasDistribution> seeds, pseeds;
    for (int s = 0; s < 4; ++s) {
      seeds.push_back(random_dist(rng, n));
      pseeds.push_back(permute(seeds.back()));
    }
    Baseline base{BiasDistribution::from_counts(Axis::kTokenPosition, labels(n), random_counts(rng, n, false))};
    Baseline pbase{permute(base.distribution)};
    EXPECT_NEAR(bias_cons(seeds), bias_cons(pseeds), 1e-12);
    EXPECT_NEAR(bias_agg(seeds, base), bias_agg(pseeds, pbase), 1e-12);
    std::map<Method, BiasDistribution> by, pby;
    for (std::size_t i = 0; i < 4; ++i) {
      by[all_methods()[i]] = seeds[i];
      pby[all_methods()[i]] = pseeds[i];
    }
    EXPECT_NEAR(bias_attr(by, Method::kLime), bias_attr(pby, Method::kLime), 1e-12);
  }
}

// ---------------------------------------------------------------------------

Dataset tiny_dataset() {
  Dataset ds;
  ds.name = "tiny";
  ds.vocab = testing::letters_vocab(5);
  auto add = [&](std::string id, std::vector<TokenId> toks, int label,
                 std::optional<std::vector<SentenceSpan>> sb = std::nullopt) {
    Instance in;
    in.id = std::move(id);
    in.token_ids = std::move(toks);
    in.label = label;
    in.sentence_boundaries = std::move(sb);
    ds.instances.push_back(std::move(in));
    ds.splits.push_back(Split::kTest);
  };
  add("a", {4, 5, 6, 7}, 0, std::vector<SentenceSpan>{{0, 2}, {2, 4}});
  add("b", {8, 8, 4}, 1, std::vector<SentenceSpan>{{0, 1}, {1, 2}, {2, 3}});
  add("c", {5, 6}, 1, std::vector<SentenceSpan>{{0, 2}});
  ds.reindex();
  return ds;
}

AttributionRecord rec(std::string id, std::vector<int> topk, int pred) {
  AttributionRecord r;
  r.instance_id = std::move(id);
  r.topk = std::move(topk);
  r.predicted_class = pred;
  r.target_class = pred;
  return r;
}

TEST(BuildDistribution, HandTalliedFrequencies) {
  const auto ds = tiny_dataset();
  const std::vector<AttributionRecord> recs{rec("a", {3}, 0), rec("b", {0, 2}, 1), rec("c", {0}, 1),
                                            rec("a", {3}, 1)};
  const auto pos = build_distribution(recs, Axis::kTokenPosition, ds);
  EXPECT_EQ(pos.categories, (std::vector<std::string>{"0", "1", "2", "3"}));
  EXPECT_EQ(pos.counts, (std::vector<std::int64_t>{2, 0, 1, 2}));
  EXPECT_EQ(pos.support_count, 5);
  EXPECT_DOUBLE_EQ(pos.probs[0], 0.4);

  // Tokens hit: a[3]=t3, b[0]=t4, b[2]=t0, c[0]=t1, a[3]=t3.
  const auto lex = build_distribution(recs, Axis::kLexical, ds);
  EXPECT_EQ(lex.categories, ds.vocab.tokens());
  EXPECT_EQ(lex.counts, (std::vector<std::int64_t>{1, 1, 0, 2, 1}));

  const auto sent = build_distribution(recs, Axis::kSentencePosition, ds);
  // a[3] -> sentence 1 (twice), b[0] -> 0, b[2] -> 2, c[0] -> 0.
  EXPECT_EQ(sent.counts, (std::vector<std::int64_t>{2, 2, 1}));

  const auto neg = build_distribution(recs, Axis::kTokenPosition, ds, 0);
  EXPECT_EQ(neg.counts, (std::vector<std::int64_t>{0, 0, 0, 1}));
  const std::vector<AttributionRecord> only_pos{rec("c", {0}, 1)};
  EXPECT_THROW(build_distribution(only_pos, Axis::kTokenPosition, ds, 0), DataError);
}

TEST(BuildDistribution, PointMassAndUniform) {
  Dataset ds;
  ds.name = "flat";
  ds.vocab = testing::letters_vocab(3);
  std::vector<AttributionRecord> mass, spread;
  for (int i = 0; i < 20; ++i) {
    Instance in;
    in.id = "i" + std::to_string(i);
    in.token_ids.assign(20, kNumSpecial);
    ds.instances.push_back(in);
    ds.splits.push_back(Split::kTest);
    mass.push_back(rec(in.id, {0}, 0));
    spread.push_back(rec(in.id, {i}, 0));
  }
  ds.reindex();
  const auto p = build_distribution(mass, Axis::kTokenPosition, ds);
  EXPECT_EQ(p.probs[0], 1.0);
  const auto u = build_distribution(spread, Axis::kTokenPosition, ds);
  for (double x : u.probs) EXPECT_DOUBLE_EQ(x, 0.05);
  EXPECT_THROW(build_distribution(mass, Axis::kSentencePosition, ds), DataError);
  EXPECT_THROW(build_distribution(std::vector<AttributionRecord>{}, Axis::kTokenPosition, ds), DataError);
  EXPECT_THROW(build_distribution(std::vector{rec("zz", {0}, 0)}, Axis::kTokenPosition, ds), DataError);
}

TEST(Axis, NamesRoundTrip) {
  for (Axis a : {Axis::kTokenPosition, Axis::kLexical, Axis::kSentencePosition}) {
    EXPECT_EQ(axis_from_string(to_string(a)), a);
  }
  EXPECT_THROW(axis_from_string("word"), UsageError);
}

}  // namespace
}  // namespace attrbias
