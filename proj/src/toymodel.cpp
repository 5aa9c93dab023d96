#include "attrbias/toymodel.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "attrbias/error.hpp"
#include "attrbias/rng.hpp"

namespace attrbias {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamInit = 0x696e697400000001ULL;
constexpr std::uint64_t kStreamShuffle = 0x7368756600000002ULL;

template <typename Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& m) {
  if (a == Activation::kTanh) m = m.array().tanh().matrix();
}

// Derivative expressed through the activation output.
template <typename Derived>
auto activation_grad(Activation a, const Eigen::MatrixBase<Derived>& y) {
  using Plain = typename Derived::PlainObject;
  if (a == Activation::kTanh) return Plain((1.0 - y.array().square()).matrix());
  return Plain(Plain::Ones(y.rows(), y.cols()));
}

MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
  }
  return m;
}

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw UsageError("embed_dim and hidden_dim must be >= 1");
  if (max_len < 3) throw UsageError("max_len must leave room for the sequence markers");
  if (vocab_size <= kNumSpecial) throw UsageError("vocab_size must exceed the special tokens");
  if (hyperparams.epochs < 0 || hyperparams.batch_size < 1) {
    throw UsageError("epochs must be >= 0 and batch_size >= 1");
  }
  if (!(hyperparams.learning_rate > 0.0) || hyperparams.weight_decay < 0.0) {
    throw UsageError("learning_rate must be > 0 and weight_decay >= 0");
  }
}

bool TrainedModel::Parameters::operator==(const Parameters& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(embedding, o.embedding) && same(positional, o.positional) &&
         same(token_w, o.token_w) && same(token_b, o.token_b) && same(hidden_w, o.hidden_w) &&
         same(hidden_b, o.hidden_b) && same(head_w, o.head_w) && same(head_b, o.head_b);
}

WrappedSequence wrap_sequence(const Instance& instance, const Vocab& vocab) {
  if (instance.token_ids.empty()) {
    throw DataError("cannot wrap empty instance '" + instance.id + "'");
  }
  WrappedSequence w;
  w.ids.reserve(instance.token_ids.size() + 2);
  w.ids.push_back(kSeqStartId);
  for (TokenId t : instance.token_ids) {
    if (t < kNumSpecial || static_cast<std::size_t>(t) >= vocab.size()) {
      throw DataError("instance '" + instance.id + "' has token id " + std::to_string(t) +
                      " outside the content vocabulary");
    }
    w.ids.push_back(t);
  }
  w.ids.push_back(kSeqEndId);
  w.content_begin = 1;
  w.content_end = w.ids.size() - 1;
  return w;
}

TrainedModel::TrainedModel(ModelConfig config, Parameters params, TrainMetrics metrics)
    : config_(std::move(config)), params_(std::move(params)), metrics_(std::move(metrics)) {
  config_.validate();
  const auto V = config_.vocab_size, E = config_.embed_dim, H = config_.hidden_dim;
  if (params_.embedding.rows() != V || params_.embedding.cols() != E ||
      params_.positional.rows() != config_.max_len || params_.positional.cols() != E ||
      params_.token_w.rows() != H || params_.token_w.cols() != E || params_.token_b.size() != H ||
      params_.hidden_w.rows() != H || params_.hidden_w.cols() != H ||
      params_.hidden_b.size() != H || params_.head_w.rows() != 2 ||
      params_.head_w.cols() != H || params_.head_b.size() != 2) {
    throw DataError("model parameter shapes do not match the config");
  }
  for (const MatrixXd* m : {&params_.embedding, &params_.positional, &params_.token_w,
                            &params_.hidden_w, &params_.head_w}) {
    if (!all_finite(*m)) throw NumericError("model parameters contain non-finite values");
  }
  if (!params_.token_b.allFinite() || !params_.hidden_b.allFinite() ||
      !params_.head_b.allFinite()) {
    throw NumericError("model parameters contain non-finite values");
  }
  build_feature_cache();
}

TrainedModel TrainedModel::initialize(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed, kStreamInit);
  const auto V = config.vocab_size, E = config.embed_dim, H = config.hidden_dim;
  Parameters p;
  p.embedding = gaussian(rng, V, E, 1.0);
  p.positional = config.use_positional_embeddings ? gaussian(rng, config.max_len, E, 1.0)
                                                  : MatrixXd::Zero(config.max_len, E);
  p.token_w = gaussian(rng, H, E, 1.0 / std::sqrt(static_cast<double>(E)));
  p.token_b = VectorXd::Zero(H);
  p.hidden_w = gaussian(rng, H, H, 1.0 / std::sqrt(static_cast<double>(H)));
  p.hidden_b = VectorXd::Zero(H);
  p.head_w = gaussian(rng, 2, H, 1.0 / std::sqrt(static_cast<double>(H)));
  p.head_b = VectorXd::Zero(2);
  return TrainedModel(config, std::move(p));
}

void TrainedModel::build_feature_cache() {
  const auto V = config_.vocab_size;
  const auto positions = config_.use_positional_embeddings ? config_.max_len : 1;
  feature_cache_.resize(static_cast<Eigen::Index>(positions) * V, config_.hidden_dim);
  for (int pos = 0; pos < positions; ++pos) {
    MatrixXd a = params_.embedding;
    if (config_.use_positional_embeddings) a.rowwise() += params_.positional.row(pos);
    MatrixXd pre = a * params_.token_w.transpose();
    pre.rowwise() += params_.token_b.transpose();
    apply_activation(config_.activation, pre);
    feature_cache_.middleRows(static_cast<Eigen::Index>(pos) * V, V) = pre;
  }
}

void TrainedModel::check_length(std::size_t len) const {
  if (len == 0) throw DataError("empty token sequence");
  if (len > static_cast<std::size_t>(config_.max_len)) {
    throw DataError("sequence of length " + std::to_string(len) + " exceeds model max_len " +
                    std::to_string(config_.max_len));
  }
}

MatrixXd TrainedModel::embed(std::span<const TokenId> wrapped) const {
  check_length(wrapped.size());
  MatrixXd out(static_cast<Eigen::Index>(wrapped.size()), config_.embed_dim);
  for (std::size_t t = 0; t < wrapped.size(); ++t) {
    const TokenId id = wrapped[t];
    if (id < 0 || id >= config_.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " outside model vocabulary");
    }
    out.row(static_cast<Eigen::Index>(t)) = params_.embedding.row(id);
  }
  return out;
}

namespace {

struct Forward {
  MatrixXd token_out;  // T x H, activation output
  VectorXd pooled;     // H
  VectorXd hidden;     // H, activation output
  Eigen::Vector2d logits;
};

Forward forward_pass(const ModelConfig& cfg, const TrainedModel::Parameters& p,
                     const MatrixXd& token_embeddings) {
  Forward f;
  MatrixXd a = token_embeddings;
  if (cfg.use_positional_embeddings) a += p.positional.topRows(a.rows());
  f.token_out = a * p.token_w.transpose();
  f.token_out.rowwise() += p.token_b.transpose();
  apply_activation(cfg.activation, f.token_out);
  f.pooled = f.token_out.colwise().mean().transpose();
  f.hidden = p.hidden_w * f.pooled + p.hidden_b;
  apply_activation(cfg.activation, f.hidden);
  f.logits = p.head_w * f.hidden + p.head_b;
  return f;
}

}  // namespace

Eigen::Vector2d TrainedModel::logits_from_embeddings(const MatrixXd& token_embeddings) const {
  check_length(static_cast<std::size_t>(token_embeddings.rows()));
  return forward_pass(config_, params_, token_embeddings).logits;
}

MatrixXd TrainedModel::logit_gradient(const MatrixXd& token_embeddings, int class_index) const {
  if (class_index != 0 && class_index != 1) throw UsageError("class_index must be 0 or 1");
  check_length(static_cast<std::size_t>(token_embeddings.rows()));
  const Forward f = forward_pass(config_, params_, token_embeddings);
  const VectorXd d_hidden_pre =
      params_.head_w.row(class_index).transpose().cwiseProduct(activation_grad(config_.activation, f.hidden));
  const VectorXd d_pooled = params_.hidden_w.transpose() * d_hidden_pre;
  const double inv_t = 1.0 / static_cast<double>(token_embeddings.rows());
  MatrixXd d_token_pre = activation_grad(config_.activation, f.token_out);
  d_token_pre.array().rowwise() *= (inv_t * d_pooled).transpose().array();
  return d_token_pre * params_.token_w;
}

Eigen::Vector2d TrainedModel::logits(std::span<const TokenId> wrapped) const {
  check_length(wrapped.size());
  const auto V = config_.vocab_size;
  VectorXd pooled = VectorXd::Zero(config_.hidden_dim);
  for (std::size_t t = 0; t < wrapped.size(); ++t) {
    const TokenId id = wrapped[t];
    if (id < 0 || id >= V) throw DataError("token id " + std::to_string(id) + " outside model vocabulary");
    const Eigen::Index row =
        (config_.use_positional_embeddings ? static_cast<Eigen::Index>(t) * V : 0) + id;
    pooled += feature_cache_.row(row).transpose();
  }
  pooled /= static_cast<double>(wrapped.size());
  VectorXd hidden = params_.hidden_w * pooled + params_.hidden_b;
  apply_activation(config_.activation, hidden);
  return params_.head_w * hidden + params_.head_b;
}

std::array<double, 2> softmax(const Eigen::Vector2d& logits) {
  const double m = logits.maxCoeff();
  const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

std::array<double, 2> TrainedModel::predict_proba(std::span<const TokenId> wrapped) const {
  return softmax(logits(wrapped));
}

std::array<double, 2> predict_proba(const TrainedModel& model, const Instance& instance) {
  ModelConfig cfg = model.config();
  if (instance.token_ids.empty()) throw DataError("cannot score empty instance '" + instance.id + "'");
  std::vector<TokenId> ids;
  ids.reserve(instance.token_ids.size() + 2);
  ids.push_back(kSeqStartId);
  ids.insert(ids.end(), instance.token_ids.begin(), instance.token_ids.end());
  ids.push_back(kSeqEndId);
  for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
    if (ids[i] < kNumSpecial || ids[i] >= cfg.vocab_size) {
      throw DataError("instance '" + instance.id + "' has a token outside the model vocabulary");
    }
  }
  return model.predict_proba(ids);
}

int predicted_class(const std::array<double, 2>& proba) { return proba[1] > proba[0] ? 1 : 0; }

MatrixXd input_embedding_gradient(const TrainedModel& model, const Instance& instance,
                                  int class_index) {
  std::vector<TokenId> ids{kSeqStartId};
  ids.insert(ids.end(), instance.token_ids.begin(), instance.token_ids.end());
  ids.push_back(kSeqEndId);
  if (instance.token_ids.empty()) throw DataError("cannot differentiate empty instance");
  return model.logit_gradient(model.embed(ids), class_index);
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw UsageError("macro_f1: length mismatch");
  double total = 0.0;
  for (int cls : {0, 1}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == cls, p = predicted[i] == cls;
      tp += (t && p);
      fp += (!t && p);
      fn += (t && !p);
    }
    const double denom = 2 * tp + fp + fn;
    total += denom > 0 ? 2 * tp / denom : 0.0;
  }
  return total / 2.0;
}

double macro_f1(const TrainedModel& model, const Dataset& dataset, Split split) {
  std::vector<int> truth, pred;
  for (std::size_t i : dataset.indices(split)) {
    truth.push_back(dataset.instances[i].label);
    pred.push_back(predicted_class(predict_proba(model, dataset.instances[i])));
  }
  if (truth.empty()) throw DataError("split '" + std::string(to_string(split)) + "' is empty");
  return macro_f1(truth, pred);
}

ModelConfig config_for(const Dataset& dataset, ModelConfig base) {
  base.vocab_size = static_cast<int>(dataset.vocab.size());
  base.max_len = static_cast<int>(dataset.max_content_length()) + 2;
  return base;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct AdamState {
  MatrixXd m, v;
  explicit AdamState(const MatrixXd& like)
      : m(MatrixXd::Zero(like.rows(), like.cols())), v(MatrixXd::Zero(like.rows(), like.cols())) {}
};

class AdamW {
 public:
  AdamW(double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {}

  void begin_step() { ++t_; }

  void update(Eigen::Ref<MatrixXd> param, const MatrixXd& grad, AdamState& s) const {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    const double c1 = 1.0 - std::pow(kBeta1, t_), c2 = 1.0 - std::pow(kBeta2, t_);
    s.m = kBeta1 * s.m + (1.0 - kBeta1) * grad;
    s.v = kBeta2 * s.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    param *= (1.0 - lr_ * wd_);
    param.array() -= lr_ * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + kEps);
  }

 private:
  double lr_, wd_;
  int t_ = 0;
};

struct Grads {
  MatrixXd embedding, positional, token_w, token_b, hidden_w, hidden_b, head_w, head_b;
  explicit Grads(const TrainedModel::Parameters& p)
      : embedding(MatrixXd::Zero(p.embedding.rows(), p.embedding.cols())),
        positional(MatrixXd::Zero(p.positional.rows(), p.positional.cols())),
        token_w(MatrixXd::Zero(p.token_w.rows(), p.token_w.cols())),
        token_b(MatrixXd::Zero(p.token_b.size(), 1)),
        hidden_w(MatrixXd::Zero(p.hidden_w.rows(), p.hidden_w.cols())),
        hidden_b(MatrixXd::Zero(p.hidden_b.size(), 1)),
        head_w(MatrixXd::Zero(2, p.head_w.cols())),
        head_b(MatrixXd::Zero(2, 1)) {}
  void zero() {
    for (MatrixXd* g : {&embedding, &positional, &token_w, &token_b, &hidden_w, &hidden_b,
                        &head_w, &head_b}) {
      g->setZero();
    }
  }
};

// Adds the cross-entropy gradient of one example into `g`; returns the loss.
double accumulate_example(const ModelConfig& cfg, const TrainedModel::Parameters& p,
                          std::span<const TokenId> ids, int label, Grads& g) {
  const auto T = static_cast<Eigen::Index>(ids.size());
  MatrixXd emb(T, cfg.embed_dim);
  for (Eigen::Index t = 0; t < T; ++t) emb.row(t) = p.embedding.row(ids[static_cast<std::size_t>(t)]);
  const Forward f = forward_pass(cfg, p, emb);

  const double m = f.logits.maxCoeff();
  const double lse = m + std::log(std::exp(f.logits[0] - m) + std::exp(f.logits[1] - m));
  const double loss = lse - f.logits[label];
  Eigen::Vector2d d_logits(std::exp(f.logits[0] - lse), std::exp(f.logits[1] - lse));
  d_logits[label] -= 1.0;

  g.head_w += d_logits * f.hidden.transpose();
  g.head_b += d_logits;
  const VectorXd d_hidden_pre = (p.head_w.transpose() * d_logits)
                                    .cwiseProduct(activation_grad(cfg.activation, f.hidden));
  g.hidden_w += d_hidden_pre * f.pooled.transpose();
  g.hidden_b += d_hidden_pre;
  const VectorXd d_pooled = p.hidden_w.transpose() * d_hidden_pre;
  MatrixXd d_token_pre = activation_grad(cfg.activation, f.token_out);
  d_token_pre.array().rowwise() *= (d_pooled / static_cast<double>(T)).transpose().array();

  MatrixXd a = emb;
  if (cfg.use_positional_embeddings) a += p.positional.topRows(T);
  g.token_w += d_token_pre.transpose() * a;
  g.token_b += d_token_pre.colwise().sum().transpose();
  const MatrixXd d_a = d_token_pre * p.token_w;
  for (Eigen::Index t = 0; t < T; ++t) {
    g.embedding.row(ids[static_cast<std::size_t>(t)]) += d_a.row(t);
  }
  if (cfg.use_positional_embeddings) g.positional.topRows(T) += d_a;
  return loss;
}

}  // namespace

TrainedModel train(const ModelConfig& config, const Dataset& dataset) {
  config.validate();
  if (static_cast<std::size_t>(config.vocab_size) != dataset.vocab.size()) {
    throw UsageError("model vocab_size does not match the dataset vocabulary");
  }
  if (static_cast<int>(dataset.max_content_length()) + 2 > config.max_len) {
    throw UsageError("max_len must be at least the longest instance plus two markers");
  }
  auto train_idx = dataset.indices(Split::kTrain);
  if (train_idx.empty()) throw DataError("dataset has no training instances");
  for (std::size_t i : train_idx) {
    const int y = dataset.instances[i].label;
    if (y != 0 && y != 1) throw DataError("labels must be binary");
  }

  TrainedModel init = TrainedModel::initialize(config);
  TrainedModel::Parameters p = init.params();
  Grads g(p);
  AdamState s_emb(p.embedding), s_pos(p.positional), s_tw(p.token_w), s_tb(g.token_b),
      s_hw(p.hidden_w), s_hb(g.hidden_b), s_ow(p.head_w), s_ob(g.head_b);
  AdamW opt(config.hyperparams.learning_rate, config.hyperparams.weight_decay);
  Rng rng(config.seed, kStreamShuffle);

  std::vector<std::vector<TokenId>> wrapped(dataset.instances.size());
  for (std::size_t i : train_idx) wrapped[i] = wrap_sequence(dataset.instances[i], dataset.vocab).ids;

  TrainMetrics metrics;
  const auto batch = static_cast<std::size_t>(config.hyperparams.batch_size);
  for (int epoch = 0; epoch < config.hyperparams.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_idx));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const std::size_t end = std::min(train_idx.size(), start + batch);
      g.zero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = train_idx[b];
        batch_loss += accumulate_example(config, p, wrapped[i], dataset.instances[i].label, g);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss;
      const double scale = 1.0 / static_cast<double>(end - start);
      opt.begin_step();
      opt.update(p.embedding, g.embedding * scale, s_emb);
      if (config.use_positional_embeddings) opt.update(p.positional, g.positional * scale, s_pos);
      opt.update(p.token_w, g.token_w * scale, s_tw);
      opt.update(p.token_b, g.token_b * scale, s_tb);
      opt.update(p.hidden_w, g.hidden_w * scale, s_hw);
      opt.update(p.hidden_b, g.hidden_b * scale, s_hb);
      opt.update(p.head_w, g.head_w * scale, s_ow);
      opt.update(p.head_b, g.head_b * scale, s_ob);
    }
    epoch_loss /= static_cast<double>(train_idx.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    metrics.loss_curve.push_back(epoch_loss);
  }

  TrainedModel trained(config, std::move(p));
  const Split eval = dataset.count(Split::kValidation) > 0 ? Split::kValidation : Split::kTest;
  metrics.eval_split = std::string(to_string(eval));
  metrics.f1 = dataset.count(eval) > 0 ? macro_f1(trained, dataset, eval) : 0.0;
  return TrainedModel(config, trained.params(), std::move(metrics));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointVersion = 1;

json tensor_to_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

MatrixXd tensor_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("checkpoint tensor size mismatch");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"max_len", c.max_len},
          {"vocab_size", c.vocab_size},
          {"use_positional_embeddings", c.use_positional_embeddings},
          {"seed", c.seed},
          {"activation", c.activation == Activation::kTanh ? "tanh" : "identity"},
          {"hyperparams",
           {{"learning_rate", c.hyperparams.learning_rate},
            {"epochs", c.hyperparams.epochs},
            {"batch_size", c.hyperparams.batch_size},
            {"weight_decay", c.hyperparams.weight_decay}}}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.use_positional_embeddings = j.at("use_positional_embeddings").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto act = j.value("activation", std::string("tanh"));
  if (act != "tanh" && act != "identity") throw DataError("unknown activation: " + act);
  c.activation = act == "tanh" ? Activation::kTanh : Activation::kIdentity;
  const auto& h = j.at("hyperparams");
  c.hyperparams.learning_rate = h.at("learning_rate").get<double>();
  c.hyperparams.epochs = h.at("epochs").get<int>();
  c.hyperparams.batch_size = h.at("batch_size").get<int>();
  c.hyperparams.weight_decay = h.at("weight_decay").get<double>();
  return c;
}

std::string serialize_model(const TrainedModel& model) {
  const auto& p = model.params();
  json j = {
      {"format", "attrbias-toymodel"},
      {"version", kCheckpointVersion},
      {"config", config_to_json(model.config())},
      {"metrics",
       {{"f1", model.metrics().f1},
        {"eval_split", model.metrics().eval_split},
        {"loss_curve", model.metrics().loss_curve}}},
      {"tensors",
       {{"embedding", tensor_to_json(p.embedding)},
        {"positional", tensor_to_json(p.positional)},
        {"token_w", tensor_to_json(p.token_w)},
        {"token_b", tensor_to_json(p.token_b)},
        {"hidden_w", tensor_to_json(p.hidden_w)},
        {"hidden_b", tensor_to_json(p.hidden_b)},
        {"head_w", tensor_to_json(p.head_w)},
        {"head_b", tensor_to_json(p.head_b)}}},
  };
  return j.dump() + "\n";
}

TrainedModel deserialize_model(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "attrbias-toymodel") {
      throw DataError("not a toy model checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    const auto& t = j.at("tensors");
    TrainedModel::Parameters p;
    p.embedding = tensor_from_json(t.at("embedding"));
    p.positional = tensor_from_json(t.at("positional"));
    p.token_w = tensor_from_json(t.at("token_w"));
    p.token_b = tensor_from_json(t.at("token_b"));
    p.hidden_w = tensor_from_json(t.at("hidden_w"));
    p.hidden_b = tensor_from_json(t.at("hidden_b"));
    p.head_w = tensor_from_json(t.at("head_w"));
    p.head_b = tensor_from_json(t.at("head_b"));
    TrainMetrics m;
    const auto& mj = j.at("metrics");
    m.f1 = mj.at("f1").get<double>();
    m.eval_split = mj.at("eval_split").get<std::string>();
    m.loss_curve = mj.at("loss_curve").get<std::vector<double>>();
    return TrainedModel(config_from_json(j.at("config")), std::move(p), std::move(m));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << serialize_model(model);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace attrbias
