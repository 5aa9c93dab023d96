// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
//   attrbias_acceptance [path-to-attrbias-cli]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "attrbias/attribution.hpp"
#include "attrbias/biasmetrics.hpp"
#include "attrbias/datagen.hpp"
#include "attrbias/faithfulness.hpp"
#include "attrbias/runner.hpp"
#include "attrbias/toymodel.hpp"
#include "test_util.hpp"

#ifndef ATTRBIAS_CLI_PATH
#define ATTRBIAS_CLI_PATH "attrbias"
#endif

namespace fs = std::filesystem;
using namespace attrbias;

namespace tol {
constexpr double kF1Low = 0.30;
constexpr double kF1High = 0.60;
constexpr double kRuntimeSeconds = 600.0;
constexpr double kFaithfulness = 0.05;
constexpr double kCausalF1 = 0.95;
constexpr double kMetric = 1e-12;
constexpr int kMetricTriples = 2000;
constexpr double kGradientRelative = 1e-4;
constexpr double kIgCompleteness = 1e-3;
constexpr int kIgSteps = 256;
constexpr double kShapley = 1e-6;
constexpr double kPlanted = 1e-9;
}  // namespace tol

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

void report(int id, const std::string& title, const Outcome& o, std::vector<bool>& all) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title;
  if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
  std::cout << std::endl;
  all.push_back(o.pass);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

const std::vector<std::string> kArtificial{std::string(kNounDetPeriod), std::string(kPeriodComma),
                                           std::string(kUniquePunctuation)};
constexpr int kSeeds = 10;

// ---------------------------------------------------------------------------
// 1. Chance band on the artificial datasets.

struct ChanceBand {
  std::map<std::string, Dataset> datasets;
  std::map<std::string, std::vector<TrainedModel>> models;
};

Outcome chance_band(ChanceBand& out) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  double lo = 1.0, hi = 0.0;
  for (const auto& name : kArtificial) {
    auto& ds = out.datasets[name] = gen_artificial(name, 0);
    for (int seed = 0; seed < kSeeds; ++seed) {
      ModelConfig base;
      base.seed = static_cast<std::uint64_t>(seed);
      auto model = train(config_for(ds, base), ds);
      const double f1 = model.metrics().f1;
      lo = std::min(lo, f1);
      hi = std::max(hi, f1);
      o.require(model.metrics().eval_split == "validation", name + " evaluated on " + model.metrics().eval_split);
      o.require(f1 >= tol::kF1Low && f1 <= tol::kF1High,
                name + " seed " + std::to_string(seed) + " f1 " + fmt(f1));
      out.models[name].push_back(std::move(model));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(secs <= tol::kRuntimeSeconds, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "30 models, f1 in [" + fmt(lo) + ", " + fmt(hi) + "], " + fmt(secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Faithfulness on unique-punctuation.

Outcome faithfulness_sanity(const ChanceBand& cb) {
  Outcome o;
  const auto& ds = cb.datasets.at(std::string(kUniquePunctuation));
  const auto& models = cb.models.at(std::string(kUniquePunctuation));
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    for (Method m : all_methods()) {
      const auto recs = explain_split(models[seed], ds, Split::kTest, m, {}, static_cast<std::uint64_t>(seed));
      const auto r = evaluate_faithfulness(models[seed], ds, recs);
      worst = std::max({worst, std::abs(r.suff), std::abs(r.cmp)});
      o.require(std::abs(r.suff) <= tol::kFaithfulness && std::abs(r.cmp) <= tol::kFaithfulness,
                std::string(to_string(m)) + " seed " + std::to_string(seed) + " suff " + fmt(r.suff) + " cmp " +
                    fmt(r.cmp));
    }
  }
  if (o.pass) o.detail = "60 runs, max |suff|,|cmp| " + fmt(worst);
  return o;
}

// ---------------------------------------------------------------------------
// 3. Causal task.

Outcome causal_task() {
  Outcome o;
  const auto ds = build_causal_dataset(gen_synthetic_causal_corpus(0, 1000, 1000), 0);
  ModelConfig base;
  const auto model = train(config_for(ds, base), ds);
  o.require(model.metrics().eval_split == "test", "evaluated on " + model.metrics().eval_split);
  o.require(model.metrics().f1 >= tol::kCausalF1, "test f1 " + fmt(model.metrics().f1));

  std::map<std::string, std::vector<const Instance*>> groups;
  std::map<std::string, std::set<Split>> splits;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& in = ds.instances[i];
    if (!in.group_id || !in.sentence_boundaries) {
      o.require(false, "instance " + in.id + " lacks group or boundaries");
      continue;
    }
    groups[*in.group_id].push_back(&in);
    splits[*in.group_id].insert(ds.splits[i]);
  }
  for (const auto& [gid, members] : groups) {
    o.require(members.size() == 6, gid + " has " + std::to_string(members.size()) + " members");
    o.require(splits[gid].size() == 1, gid + " spans splits");
    auto sentences = [](const Instance& in) {
      std::vector<std::vector<TokenId>> out;
      for (const auto& s : *in.sentence_boundaries) out.emplace_back(in.token_ids.begin() + s.start, in.token_ids.begin() + s.end);
      return out;
    };
    const auto base_sents = sentences(*members.front());
    auto base_multiset = members.front()->token_ids;
    std::sort(base_multiset.begin(), base_multiset.end());
    std::set<std::vector<int>> orders;
    for (const Instance* m : members) {
      auto ms = m->token_ids;
      std::sort(ms.begin(), ms.end());
      o.require(ms == base_multiset, gid + ": token multisets differ");
      o.require(m->label == members.front()->label, gid + ": labels differ");
      std::vector<int> order;
      for (const auto& s : sentences(*m)) {
        const auto it = std::find(base_sents.begin(), base_sents.end(), s);
        order.push_back(it == base_sents.end() ? -1 : static_cast<int>(it - base_sents.begin()));
      }
      auto sorted = order;
      std::sort(sorted.begin(), sorted.end());
      o.require(sorted == std::vector<int>{0, 1, 2}, gid + ": ordering is not a permutation of the triple");
      orders.insert(order);
    }
    o.require(orders.size() == 6, gid + ": " + std::to_string(orders.size()) + " distinct orderings");
  }
  if (o.pass) {
    o.detail = "test f1 " + fmt(model.metrics().f1) + ", " + std::to_string(groups.size()) + " groups x 6 orderings";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 4. Metrics.

long double entropy_nat(const std::vector<long double>& p) {
  long double h = 0.0L;
  for (auto x : p) {
    if (x > 0.0L) h -= x * std::log(x);
  }
  return h;
}

// Entropy form of the distance: sqrt(H(m) - (H(p) + H(q)) / 2) in bits.
double oracle_js(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<long double> lp(p.begin(), p.end()), lq(q.begin(), q.end()), m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = (lp[i] + lq[i]) / 2.0L;
  const long double jsd = (entropy_nat(m) - (entropy_nat(lp) + entropy_nat(lq)) / 2.0L) / std::log(2.0L);
  return static_cast<double>(std::sqrt(std::max(0.0L, jsd)));
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) {
    x = rng.uniform_index(4) == 0 ? 0.0 : -std::log(1.0 - rng.uniform01());
    s += x;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    return p;
  }
  for (auto& x : p) x /= s;
  return p;
}

std::vector<std::int64_t> random_counts(Rng& rng, std::size_t n) {
  std::vector<std::int64_t> c(n);
  std::int64_t total = 0;
  for (auto& x : c) total += x = static_cast<std::int64_t>(rng.uniform_index(3) == 0 ? 0 : rng.uniform_index(50));
  if (total == 0) c[rng.uniform_index(n)] = 1;
  return c;
}

std::vector<double> normalized(const std::vector<std::int64_t>& c) {
  const double total = static_cast<double>(std::accumulate(c.begin(), c.end(), std::int64_t{0}));
  std::vector<double> p;
  for (auto x : c) p.push_back(static_cast<double>(x) / total);
  return p;
}

Outcome metric_correctness() {
  Outcome o;
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < tol::kMetricTriples; ++t) {
    const std::size_t n = 1 + rng.uniform_index(25);
    const auto p = random_simplex(rng, n), q = random_simplex(rng, n), r = random_simplex(rng, n);
    const double pq = js_distance(p, q), qp = js_distance(q, p), pr = js_distance(p, r), qr = js_distance(q, r);
    o.require(pq == qp, "asymmetric at triple " + std::to_string(t));
    o.require(js_distance(p, p) <= tol::kMetric, "d(p,p) > 0 at triple " + std::to_string(t));
    o.require(p == q || pq > 0.0, "d(p,q) = 0 for p != q at triple " + std::to_string(t));
    o.require(pr <= pq + qr + tol::kMetric, "triangle inequality at triple " + std::to_string(t));
    o.require(pq >= 0.0 && pq <= 1.0, "distance outside [0,1]");
    worst = std::max(worst, std::abs(pq - oracle_js(p, q)));
  }
  o.require(worst <= tol::kMetric, "js_distance vs entropy oracle " + fmt(worst));

  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng.uniform_index(20);
    std::vector<std::string> cats;
    for (std::size_t i = 0; i < n; ++i) cats.push_back(std::to_string(i));
    const std::size_t seeds = 2 + rng.uniform_index(6);
    std::vector<std::vector<std::int64_t>> counts;
    std::vector<BiasDistribution> per_seed;
    for (std::size_t s = 0; s < seeds; ++s) {
      counts.push_back(random_counts(rng, n));
      per_seed.push_back(BiasDistribution::from_counts(Axis::kTokenPosition, cats, counts.back()));
    }
    double cons = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < seeds; ++a) {
      for (std::size_t b = 0; b < seeds; ++b) {
        if (a == b) continue;
        cons += oracle_js(normalized(counts[a]), normalized(counts[b]));
        ++pairs;
      }
    }
    cons /= pairs;
    std::vector<std::int64_t> pooled(n, 0);
    for (const auto& c : counts) {
      for (std::size_t i = 0; i < n; ++i) pooled[i] += c[i];
    }
    const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    const double agg = oracle_js(normalized(pooled), uniform);
    o.require(std::abs(bias_cons(per_seed) - cons) <= tol::kMetric, "bias_cons vs oracle at case " + std::to_string(t));
    o.require(std::abs(bias_agg(per_seed, uniform_baseline(Axis::kTokenPosition, cats)) - agg) <= tol::kMetric,
              "bias_agg vs oracle at case " + std::to_string(t));

    std::map<Method, BiasDistribution> by_method;
    std::map<Method, std::vector<double>> raw;
    const std::size_t n_methods = 2 + rng.uniform_index(5);
    for (std::size_t k = 0; k < n_methods; ++k) {
      const auto c = random_counts(rng, n);
      by_method.emplace(all_methods()[k], BiasDistribution::from_counts(Axis::kTokenPosition, cats, c));
      raw.emplace(all_methods()[k], normalized(c));
    }
    for (const auto& [m, p] : raw) {
      double expected = 0.0;
      for (const auto& [m2, q] : raw) {
        if (m2 != m) expected += oracle_js(p, q);
      }
      expected /= static_cast<double>(raw.size() - 1);
      o.require(std::abs(bias_attr(by_method, m) - expected) <= tol::kMetric,
                "bias_attr vs oracle at case " + std::to_string(t));
    }
  }
  if (o.pass) o.detail = std::to_string(tol::kMetricTriples) + " triples, oracle gap " + fmt(worst);
  return o;
}

// ---------------------------------------------------------------------------
// 5. Attribution oracles.

std::vector<TokenId> wrapped(const Instance& in) {
  std::vector<TokenId> ids{kSeqStartId};
  ids.insert(ids.end(), in.token_ids.begin(), in.token_ids.end());
  ids.push_back(kSeqEndId);
  return ids;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = static_cast<double>(i + j) / 2.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

// P(class 1) as a function of which content positions still hold their token.
testing::FunctionModel mask_game(int n, std::function<double(const std::vector<char>&)> v) {
  return testing::FunctionModel([n, v](std::span<const TokenId> ids) {
    std::vector<char> present(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) present[j] = ids[j + 1] != kMaskId;
    return v(present);
  });
}

Instance plain_instance(int n) {
  Instance in;
  in.id = "p";
  for (int i = 0; i < n; ++i) in.token_ids.push_back(kNumSpecial + i);
  return in;
}

std::vector<double> exhaustive_shapley(int n, const std::function<double(const std::vector<char>&)>& v) {
  std::vector<double> fact(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
  for (unsigned s = 0; s < (1u << n); ++s) {
    std::vector<char> present(static_cast<std::size_t>(n));
    int size = 0;
    for (int j = 0; j < n; ++j) size += present[j] = (s >> j) & 1u;
    const double base = v(present);
    for (int i = 0; i < n; ++i) {
      if (present[i]) continue;
      present[i] = 1;
      phi[i] += fact[size] * fact[n - size - 1] / fact[n] * (v(present) - base);
      present[i] = 0;
    }
  }
  return phi;
}

Outcome attribution_oracles() {
  Outcome o;
  Rng rng(77);
  // Gradients: every entry of d logit / d embedding against central differences.
  // Relative error uses max(|fd|, 1e-6) so entries near zero are compared absolutely.
  double worst_grad = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto model = testing::random_model(seed, 8, 24);
    const auto in = testing::random_instance(rng, 8, 4 + static_cast<int>(rng.uniform_index(16)));
    const auto emb = model.embed(wrapped(in));
    for (int cls : {0, 1}) {
      const auto g = model.logit_gradient(emb, cls);
      const double h = 1e-6;
      for (Eigen::Index r = 0; r < emb.rows(); ++r) {
        for (Eigen::Index c = 0; c < emb.cols(); ++c) {
          auto plus = emb, minus = emb;
          plus(r, c) += h;
          minus(r, c) -= h;
          const double fd =
              (model.logits_from_embeddings(plus)[cls] - model.logits_from_embeddings(minus)[cls]) / (2 * h);
          worst_grad = std::max(worst_grad, std::abs(g(r, c) - fd) / std::max(std::abs(fd), 1e-6));
        }
      }
    }
  }
  o.require(worst_grad <= tol::kGradientRelative, "gradient relative error " + fmt(worst_grad));

  double worst_ig = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto model = testing::random_model(seed, 6, 24);
    const auto in = testing::random_instance(rng, 6, 4 + static_cast<int>(rng.uniform_index(16)));
    for (int cls : {0, 1}) {
      const auto res = integrated_gradients(model, in, tol::kIgSteps, IgBaseline::pad(), cls);
      const double sum = std::accumulate(res.scores.begin(), res.scores.end(), 0.0);
      const double delta = model.logits_from_embeddings(model.embed(wrapped(in)))[cls] -
                           model.logits_from_embeddings(baseline_embeddings(model, in, IgBaseline::pad()))[cls];
      worst_ig = std::max(worst_ig, std::abs(sum - delta));
    }
  }
  o.require(worst_ig <= tol::kIgCompleteness, "IntGrad completeness gap " + fmt(worst_ig));

  double worst_shap = 0.0;
  for (int n = 1; n <= 8; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> c(static_cast<std::size_t>(n));
      for (auto& x : c) x = 0.05 * rng.normal();
      const auto v = [c](const std::vector<char>& p) {
        double s = 0.5;
        for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * p[j];
        return s;
      };
      const auto res = partition_shap(mask_game(n, v), plain_instance(n), 512, 1);
      const auto exact = exhaustive_shapley(n, v);
      for (int j = 0; j < n; ++j) worst_shap = std::max(worst_shap, std::abs(res.scores[j] - exact[j]));
    }
  }
  o.require(worst_shap <= tol::kShapley, "PartSHAP vs exhaustive Shapley " + fmt(worst_shap));

  double worst_rho = 1.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 4 + static_cast<int>(rng.uniform_index(13));
    // Distinct coefficients on an evenly spaced grid, in random order.
    std::vector<double> coef(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) coef[j] = 0.04 * (j - n / 2.0) / n;
    for (int j = n - 1; j > 0; --j) std::swap(coef[j], coef[rng.uniform_index(static_cast<std::uint64_t>(j) + 1)]);
    const auto model = mask_game(n, [coef](const std::vector<char>& p) {
      double s = 0.5;
      for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * p[j];
      return s;
    });
    const auto res = lime(model, plain_instance(n), {}, static_cast<std::uint64_t>(rep), 1);
    worst_rho = std::min(worst_rho, spearman(res.scores, coef));
  }
  o.require(worst_rho == 1.0, "LIME Spearman " + fmt(worst_rho));
  if (o.pass) {
    o.detail = "grad rel " + fmt(worst_grad) + ", IG gap " + fmt(worst_ig) + ", SHAP gap " + fmt(worst_shap) +
               ", LIME rho " + fmt(worst_rho);
  }
  return o;
}

// ---------------------------------------------------------------------------
// 6. Planted bias.

Outcome planted_bias() {
  Outcome o;
  constexpr int kLen = 20;
  Rng rng(5);
  Dataset ds;
  ds.name = "planted";
  ds.vocab = testing::letters_vocab(8);
  for (int i = 0; i < 200; ++i) {
    ds.instances.push_back(testing::random_instance(rng, 8, kLen, "i" + std::to_string(i)));
    ds.splits.push_back(Split::kTest);
  }
  ds.reindex();
  std::vector<BiasDistribution> per_seed;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<AttributionRecord> recs;
    for (const auto& in : ds.instances) {
      AttributionRecord r;
      r.instance_id = in.id;
      r.method = Method::kVanGrad;
      r.seed = seed;
      r.scores.assign(kLen, 0.0);
      r.scores[0] = 1.0;
      r.topk = select_topk(r.scores, 1);
      r.predicted_class = static_cast<int>(seed % 2);
      recs.push_back(r);
    }
    per_seed.push_back(build_distribution(recs, Axis::kTokenPosition, ds));
  }
  const auto cats = axis_categories(Axis::kTokenPosition, ds);
  o.require(cats.size() == kLen, "position axis has " + std::to_string(cats.size()) + " categories");
  const double agg = bias_agg(per_seed, uniform_baseline(Axis::kTokenPosition, cats));

  // Independent oracle: JSD(P, U) = (KL(P||M) + KL(U||M)) / 2 with M = (P + U) / 2, in bits.
  long double kl_p = 0.0L, kl_u = 0.0L;
  for (int i = 0; i < kLen; ++i) {
    const long double p = i == 0 ? 1.0L : 0.0L, u = 1.0L / kLen, m = (p + u) / 2.0L;
    if (p > 0) kl_p += p * std::log2(p / m);
    kl_u += u * std::log2(u / m);
  }
  const double expected = static_cast<double>(std::sqrt((kl_p + kl_u) / 2.0L));
  o.require(std::abs(agg - expected) <= tol::kPlanted, "Bias-agg " + fmt(agg) + " vs oracle " + fmt(expected));
  const double cons = bias_cons(per_seed);
  o.require(cons == 0.0, "Bias-cons " + fmt(cons));
  if (o.pass) {
    std::ostringstream s;
    s.precision(15);
    s << "Bias-agg " << agg << ", oracle " << expected << ", Bias-cons " << cons;
    o.detail = s.str();
  }
  return o;
}

// ---------------------------------------------------------------------------
// 7. End-to-end determinism through the CLI.

std::map<std::string, std::string> output_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto ext = e.path().extension();
    if (!e.is_regular_file() || (ext != ".csv" && ext != ".jsonl")) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome determinism(const std::string& cli) {
  Outcome o;
  const auto base = fs::temp_directory_path() / ("attrbias-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  auto config = default_experiment();
  config.datasets = {std::string(kUniquePunctuation), std::string(kCausal)};
  config.seeds = {0, 1};
  config.test_limit = 12;
  config.threads = 2;
  const auto config_path = base / "config.json";
  std::ofstream(config_path) << experiment_to_json(config).dump(2);

  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"run1", "run2"}) {
    const auto out = base / name;
    const std::string cmd = "\"" + cli + "\" run-all --config \"" + config_path.string() + "\" --out \"" +
                            out.string() + "\" > \"" + (base / (std::string(name) + ".log")).string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    o.require(rc == 0, std::string(name) + " exited with status " + std::to_string(rc));
    if (rc != 0) break;
    runs.push_back(output_files(out));
  }
  if (o.pass) {
    o.require(runs[0].size() > 0, "no outputs");
    o.require(runs[0].size() == runs[1].size(), "different file sets");
    for (const auto& [path, bytes] : runs[0]) {
      const auto it = runs[1].find(path);
      o.require(it != runs[1].end() && it->second == bytes, path + " differs");
    }
    o.detail = std::to_string(runs[0].size()) + " CSV/JSONL files byte-identical";
    fs::remove_all(base);
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : ATTRBIAS_CLI_PATH;
  std::vector<bool> results;
  auto run = [&](int id, const std::string& title, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    report(id, title, o, results);
  };
  ChanceBand cb;
  bool have_models = false;
  run(1, "chance-band f1 on the artificial datasets", [&] {
    auto o = chance_band(cb);
    have_models = cb.models.size() == kArtificial.size();
    return o;
  });
  run(2, "faithfulness on unique-punctuation", [&] {
    if (!have_models) throw std::runtime_error("models from criterion 1 unavailable");
    return faithfulness_sanity(cb);
  });
  run(3, "causal-task learnability and permutation groups", causal_task);
  run(4, "metric axioms and brute-force bias metrics", metric_correctness);
  run(5, "attribution oracles", attribution_oracles);
  run(6, "planted position-0 bias", planted_bias);
  run(7, "run-all determinism", [&] { return determinism(cli); });
  const bool all = std::all_of(results.begin(), results.end(), [](bool b) { return b; });
  return all ? 0 : 1;
}
