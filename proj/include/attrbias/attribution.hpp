#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrbias/dataset.hpp"
#include "attrbias/toymodel.hpp"

namespace attrbias {

enum class Method { kPartShap, kLime, kVanGrad, kGradXInput, kIntGrad, kIntGradXInput };

// Canonical order: PartSHAP, LIME, VanGrad, GradXI, IntGrad, IntGradXI.
const std::array<Method, 6>& all_methods();
std::string_view to_string(Method method);
// Throws UsageError for unknown names.
Method method_from_string(std::string_view name);

// Scores over content tokens only; sequence-marker positions are dropped.
struct AttributionResult {
  std::vector<double> scores;
  int target_class = 0;
  // PartSHAP: evaluation budget ran out before every span became a singleton.
  bool coarse = false;
  // LIME: the regression system's condition number exceeded 1e10.
  bool ill_conditioned = false;
  int model_evaluations = 0;
};

// Integrated-gradients reference input for the content positions. Marker
// positions always keep their own embeddings.
struct IgBaseline {
  enum class Kind { kPadToken, kZero, kExplicit };
  Kind kind = Kind::kPadToken;
  Eigen::MatrixXd rows;  // kExplicit: one row per content token

  static IgBaseline pad() { return {}; }
  static IgBaseline zero() { return {Kind::kZero, {}}; }
  static IgBaseline explicit_rows(Eigen::MatrixXd r) { return {Kind::kExplicit, std::move(r)}; }
};

// Embedding matrix (wrapped positions) of the integration start point.
Eigen::MatrixXd baseline_embeddings(const TrainedModel& model, const Instance& instance,
                                    const IgBaseline& baseline);

// Gradient methods target the predicted class unless `target` is given.
AttributionResult vanilla_grad(const TrainedModel& model, const Instance& instance,
                               std::optional<int> target = std::nullopt);
AttributionResult grad_x_input(const TrainedModel& model, const Instance& instance,
                               std::optional<int> target = std::nullopt);
// Midpoint Riemann sum of the path integral; score = <avg grad, x - baseline>.
AttributionResult integrated_gradients(const TrainedModel& model, const Instance& instance,
                                       int steps = 64, const IgBaseline& baseline = {},
                                       std::optional<int> target = std::nullopt);
// Same path average multiplied by the raw input embedding.
AttributionResult intgrad_x_input(const TrainedModel& model, const Instance& instance,
                                  int steps = 64, const IgBaseline& baseline = {},
                                  std::optional<int> target = std::nullopt);

struct LimeOptions {
  int n_samples = 1000;
  std::optional<double> kernel_width;  // default 0.25 * sqrt(token count)
  double ridge = 1e-3;
};

// Weighted ridge surrogate over binary keep/mask features; masked tokens are
// replaced by [MASK]. The kernel is exp(-d^2 / width^2) with d the fraction
// of masked tokens.
AttributionResult lime(const ProbabilityModel& model, const Instance& instance,
                       const LimeOptions& options, std::uint64_t seed, int target_class);

// Owen values over a balanced binary partition of contiguous token spans.
AttributionResult partition_shap(const ProbabilityModel& model, const Instance& instance,
                                 int max_evals, int target_class);

enum class TopkRanking { kSigned, kAbsolute };

// Indices of the k largest scores, descending; ties go to the lowest index.
std::vector<int> select_topk(std::span<const double> scores, int k,
                             TopkRanking ranking = TopkRanking::kSigned);

struct AttributionRecord {
  std::string instance_id;
  Method method = Method::kVanGrad;
  std::uint64_t seed = 0;
  int target_class = 0;
  int predicted_class = 0;
  double predicted_proba = 0.0;
  std::vector<double> scores;
  std::vector<int> topk;

  bool operator==(const AttributionRecord&) const = default;
};

struct AttributionOptions {
  int ig_steps = 64;
  IgBaseline ig_baseline;
  LimeOptions lime;
  int shap_max_evals = 512;
  int k = 1;
  TopkRanking ranking = TopkRanking::kSigned;
};

std::array<double, 2> predict_wrapped(const ProbabilityModel& model, const Instance& instance);

// Runs one method on one instance, targeting the predicted class. `model_seed`
// identifies the trained model and, mixed with the instance id, seeds LIME.
AttributionRecord explain(const TrainedModel& model, const Instance& instance, Method method,
                          const AttributionOptions& options, std::uint64_t model_seed);

// Explains the instances of `split` in dataset order; `limit` > 0 truncates.
std::vector<AttributionRecord> explain_split(const TrainedModel& model, const Dataset& dataset,
                                             Split split, Method method,
                                             const AttributionOptions& options,
                                             std::uint64_t model_seed, std::size_t limit = 0);

}  // namespace attrbias
