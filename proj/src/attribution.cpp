#include "attrbias/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "attrbias/error.hpp"
#include "attrbias/hashing.hpp"
#include "attrbias/rng.hpp"

namespace attrbias {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::uint64_t kStreamLime = 0x6c696d6500000001ULL;
constexpr double kConditionLimit = 1e10;

std::vector<TokenId> wrapped(const Instance& instance) {
  if (instance.token_ids.empty()) throw DataError("cannot explain empty instance '" + instance.id + "'");
  std::vector<TokenId> ids;
  ids.reserve(instance.token_ids.size() + 2);
  ids.push_back(kSeqStartId);
  ids.insert(ids.end(), instance.token_ids.begin(), instance.token_ids.end());
  ids.push_back(kSeqEndId);
  return ids;
}

int resolve_target(const TrainedModel& model, std::span<const TokenId> ids, std::optional<int> target) {
  if (target) {
    if (*target != 0 && *target != 1) throw UsageError("target class must be 0 or 1");
    return *target;
  }
  return predicted_class(model.predict_proba(ids));
}

// Path-averaged gradient at the wrapped positions.
MatrixXd path_average_gradient(const TrainedModel& model, const MatrixXd& input,
                               const MatrixXd& base, int steps, int target) {
  if (steps < 2) throw UsageError("integrated gradients needs steps >= 2");
  MatrixXd sum = MatrixXd::Zero(input.rows(), input.cols());
  const MatrixXd diff = input - base;
  for (int k = 0; k < steps; ++k) {
    const double alpha = (k + 0.5) / steps;
    sum += model.logit_gradient(base + alpha * diff, target);
  }
  return sum / static_cast<double>(steps);
}

}  // namespace

const std::array<Method, 6>& all_methods() {
  static constexpr std::array<Method, 6> kAll{Method::kPartShap,   Method::kLime,
                                              Method::kVanGrad,    Method::kGradXInput,
                                              Method::kIntGrad,    Method::kIntGradXInput};
  return kAll;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kPartShap: return "PartSHAP";
    case Method::kLime: return "LIME";
    case Method::kVanGrad: return "VanGrad";
    case Method::kGradXInput: return "GradXI";
    case Method::kIntGrad: return "IntGrad";
    case Method::kIntGradXInput: return "IntGradXI";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw UsageError("unknown attribution method: " + std::string(name));
}

MatrixXd baseline_embeddings(const TrainedModel& model, const Instance& instance,
                             const IgBaseline& baseline) {
  const auto ids = wrapped(instance);
  MatrixXd base = model.embed(ids);
  const auto n = static_cast<Eigen::Index>(instance.token_ids.size());
  switch (baseline.kind) {
    case IgBaseline::Kind::kPadToken:
      for (Eigen::Index t = 1; t <= n; ++t) base.row(t) = model.params().embedding.row(kPadId);
      break;
    case IgBaseline::Kind::kZero:
      base.middleRows(1, n).setZero();
      break;
    case IgBaseline::Kind::kExplicit:
      if (baseline.rows.rows() != n || baseline.rows.cols() != base.cols()) {
        throw UsageError("explicit baseline must have one row per content token");
      }
      base.middleRows(1, n) = baseline.rows;
      break;
  }
  return base;
}

AttributionResult vanilla_grad(const TrainedModel& model, const Instance& instance,
                               std::optional<int> target) {
  const auto ids = wrapped(instance);
  AttributionResult r;
  r.target_class = resolve_target(model, ids, target);
  const MatrixXd g = model.logit_gradient(model.embed(ids), r.target_class);
  for (std::size_t t = 1; t + 1 < ids.size(); ++t) {
    r.scores.push_back(g.row(static_cast<Eigen::Index>(t)).norm());
  }
  r.model_evaluations = 1;
  return r;
}

AttributionResult grad_x_input(const TrainedModel& model, const Instance& instance,
                               std::optional<int> target) {
  const auto ids = wrapped(instance);
  AttributionResult r;
  r.target_class = resolve_target(model, ids, target);
  const MatrixXd emb = model.embed(ids);
  const MatrixXd g = model.logit_gradient(emb, r.target_class);
  for (std::size_t t = 1; t + 1 < ids.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    r.scores.push_back(g.row(row).dot(emb.row(row)));
  }
  r.model_evaluations = 1;
  return r;
}

AttributionResult integrated_gradients(const TrainedModel& model, const Instance& instance,
                                       int steps, const IgBaseline& baseline,
                                       std::optional<int> target) {
  const auto ids = wrapped(instance);
  AttributionResult r;
  r.target_class = resolve_target(model, ids, target);
  const MatrixXd emb = model.embed(ids);
  const MatrixXd base = baseline_embeddings(model, instance, baseline);
  const MatrixXd avg = path_average_gradient(model, emb, base, steps, r.target_class);
  for (std::size_t t = 1; t + 1 < ids.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    r.scores.push_back(avg.row(row).dot(emb.row(row) - base.row(row)));
  }
  r.model_evaluations = steps;
  return r;
}

AttributionResult intgrad_x_input(const TrainedModel& model, const Instance& instance, int steps,
                                  const IgBaseline& baseline, std::optional<int> target) {
  const auto ids = wrapped(instance);
  AttributionResult r;
  r.target_class = resolve_target(model, ids, target);
  const MatrixXd emb = model.embed(ids);
  const MatrixXd base = baseline_embeddings(model, instance, baseline);
  const MatrixXd avg = path_average_gradient(model, emb, base, steps, r.target_class);
  for (std::size_t t = 1; t + 1 < ids.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    r.scores.push_back(avg.row(row).dot(emb.row(row)));
  }
  r.model_evaluations = steps;
  return r;
}

// ---------------------------------------------------------------------------
// LIME

AttributionResult lime(const ProbabilityModel& model, const Instance& instance,
                       const LimeOptions& options, std::uint64_t seed, int target_class) {
  const auto base_ids = wrapped(instance);
  const auto d = static_cast<int>(instance.token_ids.size());
  if (options.n_samples < d + 2) {
    throw UsageError("LIME needs n_samples >= token count + 2 (" + std::to_string(d + 2) + ")");
  }
  if (target_class != 0 && target_class != 1) throw UsageError("target class must be 0 or 1");
  const double width = options.kernel_width.value_or(0.25 * std::sqrt(static_cast<double>(d)));
  if (!(width > 0.0)) throw UsageError("LIME kernel width must be positive");

  Rng rng(seed, kStreamLime);
  const int n = options.n_samples;
  MatrixXd X = MatrixXd::Ones(n, d);
  VectorXd y(n), w(n);
  std::vector<int> order(static_cast<std::size_t>(d));
  std::vector<TokenId> ids = base_ids;
  for (int s = 0; s < n; ++s) {
    // The first sample is the unperturbed instance.
    int removed = 0;
    if (s > 0) {
      removed = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(d)));
      std::iota(order.begin(), order.end(), 0);
      for (int j = 0; j < removed; ++j) {
        const auto pick = j + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(d - j)));
        std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(pick)]);
        X(s, order[static_cast<std::size_t>(j)]) = 0.0;
      }
    }
    for (int j = 0; j < d; ++j) {
      ids[static_cast<std::size_t>(j) + 1] =
          X(s, j) > 0.5 ? base_ids[static_cast<std::size_t>(j) + 1] : kMaskId;
    }
    y[s] = model.predict_proba(ids)[static_cast<std::size_t>(target_class)];
    const double dist = static_cast<double>(removed) / d;
    w[s] = std::exp(-(dist * dist) / (width * width));
  }

  // Intercept handled by weighted centering; it is not penalized.
  const double wsum = w.sum();
  const Eigen::RowVectorXd x_mean = (w.transpose() * X) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const MatrixXd Xc = X.rowwise() - x_mean;
  const VectorXd yc = y.array() - y_mean;
  MatrixXd A = Xc.transpose() * w.asDiagonal() * Xc;
  A.diagonal().array() += options.ridge;
  const VectorXd b = Xc.transpose() * (w.asDiagonal() * yc);

  AttributionResult r;
  r.target_class = target_class;
  r.model_evaluations = n;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  r.ill_conditioned = !(lo > 0.0) || hi / lo > kConditionLimit;
  const VectorXd beta = A.ldlt().solve(b);
  if (!beta.allFinite()) throw NumericError("LIME regression produced non-finite coefficients");
  r.scores.assign(beta.data(), beta.data() + beta.size());
  return r;
}

// ---------------------------------------------------------------------------
// Partition SHAP

namespace {

struct OwenNode {
  int lo, hi;
  std::vector<char> context;  // 1 = token present
  double f_off, f_on;         // value without / with the span, given context
  double weight;
};

struct QueueEntry {
  double priority;
  std::uint64_t order;
  std::size_t node;
  bool operator<(const QueueEntry& o) const {
    // std::priority_queue is a max-heap; earlier insertions win ties.
    if (priority != o.priority) return priority < o.priority;
    return order > o.order;
  }
};

}  // namespace

AttributionResult partition_shap(const ProbabilityModel& model, const Instance& instance,
                                 int max_evals, int target_class) {
  const auto base_ids = wrapped(instance);
  const int n = static_cast<int>(instance.token_ids.size());
  if (target_class != 0 && target_class != 1) throw UsageError("target class must be 0 or 1");
  if (max_evals < 2) throw UsageError("PartSHAP needs max_evals >= 2");

  AttributionResult r;
  r.target_class = target_class;
  r.scores.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<TokenId> ids = base_ids;
  auto value = [&](const std::vector<char>& present) {
    for (int j = 0; j < n; ++j) {
      ids[static_cast<std::size_t>(j) + 1] =
          present[static_cast<std::size_t>(j)] ? base_ids[static_cast<std::size_t>(j) + 1] : kMaskId;
    }
    ++r.model_evaluations;
    return model.predict_proba(ids)[static_cast<std::size_t>(target_class)];
  };

  const std::vector<char> none(static_cast<std::size_t>(n), 0);
  const std::vector<char> all(static_cast<std::size_t>(n), 1);
  std::vector<OwenNode> nodes;
  nodes.push_back({0, n, none, value(none), value(all), 1.0});
  std::priority_queue<QueueEntry> queue;
  std::uint64_t counter = 0;
  queue.push({0.0, counter++, 0});

  auto set_span = [](std::vector<char> mask, int lo, int hi) {
    std::fill(mask.begin() + lo, mask.begin() + hi, char{1});
    return mask;
  };

  while (!queue.empty()) {
    const std::size_t idx = queue.top().node;
    queue.pop();
    const OwenNode node = nodes[idx];
    const double delta = (node.f_on - node.f_off) * node.weight;
    if (node.hi - node.lo == 1) {
      r.scores[static_cast<std::size_t>(node.lo)] += delta;
      continue;
    }
    if (r.model_evaluations + 2 > max_evals) {
      // Out of budget: spread the span's share evenly over its tokens.
      r.coarse = true;
      const double share = delta / (node.hi - node.lo);
      for (int j = node.lo; j < node.hi; ++j) r.scores[static_cast<std::size_t>(j)] += share;
      continue;
    }
    const int mid = node.lo + (node.hi - node.lo) / 2;
    const auto with_left = set_span(node.context, node.lo, mid);
    const auto with_right = set_span(node.context, mid, node.hi);
    const double f_left = value(with_left);
    const double f_right = value(with_right);
    const double w = node.weight / 2.0;
    auto push = [&](int lo, int hi, const std::vector<char>& ctx, double off, double on) {
      nodes.push_back({lo, hi, ctx, off, on, w});
      queue.push({std::abs(on - off) * w, counter++, nodes.size() - 1});
    };
    // Each child is evaluated with its sibling absent and present.
    push(node.lo, mid, node.context, node.f_off, f_left);
    push(mid, node.hi, node.context, node.f_off, f_right);
    push(node.lo, mid, with_right, f_right, node.f_on);
    push(mid, node.hi, with_left, f_left, node.f_on);
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<int> select_topk(std::span<const double> scores, int k, TopkRanking ranking) {
  if (k < 1) throw UsageError("k must be >= 1");
  if (static_cast<std::size_t>(k) > scores.size()) {
    throw UsageError("k = " + std::to_string(k) + " exceeds content length " +
                     std::to_string(scores.size()));
  }
  auto key = [&](std::size_t i) {
    const double s = scores[i];
    if (std::isnan(s)) return -std::numeric_limits<double>::infinity();
    return ranking == TopkRanking::kAbsolute ? std::abs(s) : s;
  };
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return key(static_cast<std::size_t>(a)) > key(static_cast<std::size_t>(b));
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

std::array<double, 2> predict_wrapped(const ProbabilityModel& model, const Instance& instance) {
  return model.predict_proba(wrapped(instance));
}

AttributionRecord explain(const TrainedModel& model, const Instance& instance, Method method,
                          const AttributionOptions& options, std::uint64_t model_seed) {
  const auto proba = predict_wrapped(model, instance);
  const int target = predicted_class(proba);
  AttributionResult res;
  switch (method) {
    case Method::kVanGrad: res = vanilla_grad(model, instance, target); break;
    case Method::kGradXInput: res = grad_x_input(model, instance, target); break;
    case Method::kIntGrad:
      res = integrated_gradients(model, instance, options.ig_steps, options.ig_baseline, target);
      break;
    case Method::kIntGradXInput:
      res = intgrad_x_input(model, instance, options.ig_steps, options.ig_baseline, target);
      break;
    case Method::kLime: {
      const std::uint64_t seed = model_seed ^ stable_hash64(instance.id);
      res = lime(model, instance, options.lime, seed, target);
      break;
    }
    case Method::kPartShap: res = partition_shap(model, instance, options.shap_max_evals, target); break;
  }
  for (double s : res.scores) {
    if (!std::isfinite(s)) {
      throw NumericError(std::string(to_string(method)) + " produced a non-finite score on '" +
                         instance.id + "'");
    }
  }
  AttributionRecord rec;
  rec.instance_id = instance.id;
  rec.method = method;
  rec.seed = model_seed;
  rec.target_class = target;
  rec.predicted_class = target;
  rec.predicted_proba = proba[static_cast<std::size_t>(target)];
  rec.topk = select_topk(res.scores, options.k, options.ranking);
  rec.scores = std::move(res.scores);
  return rec;
}

std::vector<AttributionRecord> explain_split(const TrainedModel& model, const Dataset& dataset,
                                             Split split, Method method,
                                             const AttributionOptions& options,
                                             std::uint64_t model_seed, std::size_t limit) {
  auto idx = dataset.indices(split);
  if (limit > 0 && idx.size() > limit) idx.resize(limit);
  std::vector<AttributionRecord> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(explain(model, dataset.instances[i], method, options, model_seed));
  return out;
}

}  // namespace attrbias
