#pragma once

#include <Eigen/Dense>
#include <array>
#include <nlohmann/json_fwd.hpp>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrbias/dataset.hpp"

namespace attrbias {

enum class Activation { kTanh, kIdentity };

struct TrainHyperparams {
  double learning_rate = 1e-3;
  int epochs = 5;
  int batch_size = 8;
  double weight_decay = 1e-2;
  bool operator==(const TrainHyperparams&) const = default;
};

struct ModelConfig {
  int embed_dim = 16;
  int hidden_dim = 16;
  int max_len = 22;
  int vocab_size = 0;  // including the four special tokens
  bool use_positional_embeddings = true;
  std::uint64_t seed = 0;
  TrainHyperparams hyperparams;
  // kIdentity turns the network into an affine map of the embeddings; used to
  // build models with closed-form attributions.
  Activation activation = Activation::kTanh;

  // Throws UsageError when dimensions are inconsistent.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainMetrics {
  double f1 = 0.0;  // macro-F1 on the evaluation split
  std::string eval_split;
  std::vector<double> loss_curve;  // mean training loss per epoch
  bool operator==(const TrainMetrics&) const = default;
};

// Wrapped id sequence plus the content span inside it.
struct WrappedSequence {
  std::vector<TokenId> ids;
  std::size_t content_begin = 1;
  std::size_t content_end = 1;  // exclusive
};

// Returns [CLS] + content + [SEP]. Throws DataError on an empty instance or
// on ids outside the vocabulary.
WrappedSequence wrap_sequence(const Instance& instance, const Vocab& vocab);

// Anything that maps a wrapped id sequence to class probabilities.
class ProbabilityModel {
 public:
  virtual ~ProbabilityModel() = default;
  virtual std::array<double, 2> predict_proba(std::span<const TokenId> wrapped) const = 0;
};

// Token embeddings -> (+ positional) -> token-wise dense layer -> mean pool
// -> hidden layer -> 2-logit head. Immutable once constructed.
class TrainedModel final : public ProbabilityModel {
 public:
  struct Parameters {
    Eigen::MatrixXd embedding;   // vocab_size x embed_dim
    Eigen::MatrixXd positional;  // max_len x embed_dim
    Eigen::MatrixXd token_w;     // hidden x embed_dim
    Eigen::VectorXd token_b;     // hidden
    Eigen::MatrixXd hidden_w;    // hidden x hidden
    Eigen::VectorXd hidden_b;    // hidden
    Eigen::MatrixXd head_w;      // 2 x hidden
    Eigen::VectorXd head_b;      // 2
    bool operator==(const Parameters&) const;
  };

  TrainedModel(ModelConfig config, Parameters params, TrainMetrics metrics = {});

  // Random initialization from config.seed.
  static TrainedModel initialize(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const Parameters& params() const { return params_; }
  const TrainMetrics& metrics() const { return metrics_; }

  // Rows are the token embeddings (no positional term) of `wrapped`.
  Eigen::MatrixXd embed(std::span<const TokenId> wrapped) const;

  Eigen::Vector2d logits_from_embeddings(const Eigen::MatrixXd& token_embeddings) const;
  // Gradient of logit `class_index` with respect to every row of
  // `token_embeddings`.
  Eigen::MatrixXd logit_gradient(const Eigen::MatrixXd& token_embeddings, int class_index) const;

  Eigen::Vector2d logits(std::span<const TokenId> wrapped) const;
  std::array<double, 2> predict_proba(std::span<const TokenId> wrapped) const override;

  bool operator==(const TrainedModel& other) const {
    return config_ == other.config_ && params_ == other.params_ && metrics_ == other.metrics_;
  }

 private:
  void check_length(std::size_t len) const;
  void build_feature_cache();

  ModelConfig config_;
  Parameters params_;
  TrainMetrics metrics_;
  // Token-wise layer output for every (position, token) pair; inference only.
  Eigen::MatrixXd feature_cache_;
};

std::array<double, 2> softmax(const Eigen::Vector2d& logits);

// Minibatch AdamW on cross-entropy over the train split. Deterministic given
// config.seed, which drives both initialization and shuffling. Throws
// NumericError naming the epoch when the loss turns non-finite.
TrainedModel train(const ModelConfig& config, const Dataset& dataset);

std::array<double, 2> predict_proba(const TrainedModel& model, const Instance& instance);
int predicted_class(const std::array<double, 2>& proba);

// One gradient row per wrapped position (sequence markers included).
Eigen::MatrixXd input_embedding_gradient(const TrainedModel& model, const Instance& instance,
                                         int class_index);

// Macro-F1 of the model on one split.
double macro_f1(const TrainedModel& model, const Dataset& dataset, Split split);
double macro_f1(std::span<const int> truth, std::span<const int> predicted);

// Sizes a config for a dataset: vocab_size and max_len (longest + 2).
ModelConfig config_for(const Dataset& dataset, ModelConfig base);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

// Versioned JSON checkpoint; doubles are written in shortest round-trip form
// so a load reproduces the parameters bit-for-bit.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::string& text);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace attrbias
