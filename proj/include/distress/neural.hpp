#pragma once

// Feed-forward softmax classifier trained with Nesterov accelerated gradient,
// an L1 penalty on weights and inverted dropout on hidden activations.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "distress/common.hpp"
#include "distress/fusion.hpp"
#include "distress/io.hpp"

namespace distress {

struct MlpConfig {
  std::size_t input_dim = 612;
  std::vector<std::size_t> hidden_layers{50};
  std::size_t output_dim = 2;
  double lr = 5e-4;
  double l1 = 1e-5;
  double momentum = 0.9;
  double dropout_p = 0.5;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;

  void validate() const {
    if (input_dim == 0) throw ValidationError("mlp: input_dim must be positive");
    for (auto h : hidden_layers)
      if (h == 0) throw ValidationError("mlp: hidden widths must be positive");
    if (output_dim != 2) throw ValidationError("mlp: output_dim must be 2");
    if (!(lr > 0.0)) throw ValidationError("mlp: lr must be positive");
    if (!(l1 >= 0.0)) throw ValidationError("mlp: l1 must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("mlp: momentum must lie in [0, 1)");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ValidationError("mlp: dropout_p must lie in [0, 1)");
    if (batch_size == 0) throw ValidationError("mlp: batch_size must be positive");
  }
};

inline void to_json(nlohmann::json& j, const MlpConfig& c) {
  j = {{"input_dim", c.input_dim}, {"hidden_layers", c.hidden_layers}, {"output_dim", c.output_dim},
       {"lr", c.lr},               {"l1", c.l1},                       {"momentum", c.momentum},
       {"dropout_p", c.dropout_p}, {"epochs", c.epochs},               {"batch_size", c.batch_size},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, MlpConfig& c) {
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  c.output_dim = j.value("output_dim", c.output_dim);
  c.lr = j.value("lr", c.lr);
  c.l1 = j.value("l1", c.l1);
  c.momentum = j.value("momentum", c.momentum);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
}

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Parameters and velocities share this shape.
using LayerStack = std::vector<DenseLayer>;

struct MlpModel {
  MlpConfig config;
  LayerStack layers;
  LayerStack velocity;

  static MlpModel init(const MlpConfig& config) {
    config.validate();
    MlpModel m;
    m.config = config;
    Rng rng{derive_seed(config.seed, 0x6d6c70 /* "mlp" */)};
    std::size_t fan_in = config.input_dim;
    std::vector<std::size_t> widths = config.hidden_layers;
    widths.push_back(config.output_dim);
    for (auto out : widths) {
      DenseLayer l;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      l.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in));
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = uniform(rng, -bound, bound);
      l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
      m.layers.push_back(l);
      m.velocity.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                            Eigen::VectorXd::Zero(l.bias.size())});
      fan_in = out;
    }
    return m;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  double weight_l1() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.weights.cwiseAbs().sum();
    return s;
  }
};

enum class Mode { train, infer };

// Samples as columns; labels in {0, 1}.
struct Batch {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

namespace mlp_detail {

inline void check_input(const MlpModel& m, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != m.config.input_dim)
    throw ValidationError("mlp: input has " + std::to_string(rows) + " features, model expects " +
                          std::to_string(m.config.input_dim));
}

// Column-wise softmax, max-shifted.
inline Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

// -log softmax(z)[y] for each column.
inline double sum_nll(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    const double lse = mx + std::log((logits.col(c).array() - mx).exp().sum());
    s += lse - logits(labels[static_cast<std::size_t>(c)], c);
  }
  return s;
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per hidden layer
  std::vector<Eigen::MatrixXd> act;   // act[0] = inputs, act[l+1] = output of hidden layer l
  std::vector<Eigen::MatrixXd> mask;  // scaled dropout masks (empty when unused)
  Eigen::MatrixXd logits;
};

inline ForwardTrace run(const LayerStack& layers, const MlpConfig& cfg, const Eigen::MatrixXd& x, Rng* dropout_rng) {
  ForwardTrace t;
  t.act.push_back(x);
  const bool drop = dropout_rng != nullptr && cfg.dropout_p > 0.0;
  const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * t.act.back();
    z.colwise() += layers[l].bias;
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    if (drop) {
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          mask(r, c) = uniform01(*dropout_rng) < cfg.dropout_p ? 0.0 : keep_scale;
      a = a.cwiseProduct(mask);
      t.mask.push_back(std::move(mask));
    }
    t.pre.push_back(std::move(z));
    t.act.push_back(std::move(a));
  }
  t.logits = layers.back().weights * t.act.back();
  t.logits.colwise() += layers.back().bias;
  return t;
}

inline double l1_penalty(const LayerStack& layers, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& l : layers) s += l.weights.cwiseAbs().sum();
  return lambda * s;
}

}  // namespace mlp_detail

// Class probabilities for a single input. In train mode hidden units are
// dropped with probability dropout_p and survivors scaled by 1/(1-p).
inline Eigen::Vector2d forward(const MlpModel& model, const Eigen::VectorXd& input, Mode mode, Rng* rng = nullptr) {
  mlp_detail::check_input(model, input.size());
  if (mode == Mode::train && model.config.dropout_p > 0.0 && rng == nullptr)
    throw ValidationError("forward: train mode with dropout needs an rng");
  const auto t = mlp_detail::run(model.layers, model.config, input, mode == Mode::train ? rng : nullptr);
  return mlp_detail::softmax(t.logits).col(0);
}

// P(class 1) per column, inference mode.
inline Eigen::VectorXd predict_proba(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  mlp_detail::check_input(model, inputs.rows());
  Eigen::VectorXd out(inputs.cols());
  constexpr Eigen::Index chunk = 1024;
  for (Eigen::Index start = 0; start < inputs.cols(); start += chunk) {
    const Eigen::Index n = std::min(chunk, inputs.cols() - start);
    const auto t = mlp_detail::run(model.layers, model.config, inputs.middleCols(start, n), nullptr);
    out.segment(start, n) = mlp_detail::softmax(t.logits).row(1).transpose();
  }
  return out;
}

// Mean negative log-likelihood (inference mode) plus lambda * sum |w|.
inline double loss(const MlpModel& model, const Batch& batch) {
  if (batch.size() == 0) throw ValidationError("loss: empty batch");
  mlp_detail::check_input(model, batch.inputs.rows());
  const auto t = mlp_detail::run(model.layers, model.config, batch.inputs, nullptr);
  return mlp_detail::sum_nll(t.logits, batch.labels) / static_cast<double>(batch.size()) +
         mlp_detail::l1_penalty(model.layers, model.config.l1);
}

struct GradientResult {
  LayerStack grads;
  double loss = 0.0;  // objective under the same dropout mask
};

namespace mlp_detail {

inline GradientResult gradients_at(const LayerStack& layers, const MlpConfig& cfg, const Batch& batch, Rng* rng) {
  const auto t = run(layers, cfg, batch.inputs, rng);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  GradientResult g;
  g.loss = sum_nll(t.logits, batch.labels) * inv_n + l1_penalty(layers, cfg.l1);

  Eigen::MatrixXd delta = softmax(t.logits);
  for (std::size_t c = 0; c < batch.size(); ++c) delta(batch.labels[c], static_cast<Eigen::Index>(c)) -= 1.0;
  delta *= inv_n;

  g.grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    auto& gl = g.grads[l];
    gl.weights = delta * t.act[l].transpose();
    if (cfg.l1 != 0.0)
      gl.weights += cfg.l1 * layers[l].weights.unaryExpr([](double w) { return double((w > 0) - (w < 0)); });
    gl.bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd da = layers[l].weights.transpose() * delta;
    if (!t.mask.empty()) da = da.cwiseProduct(t.mask[l - 1]);
    delta = da.cwiseProduct((t.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

}  // namespace mlp_detail

// Exact gradient of the loss (L1 subgradient sign(w), sign(0) = 0) under a
// dropout mask drawn from `rng`; pass nullptr to disable dropout.
inline GradientResult gradients(const MlpModel& model, const Batch& batch, Rng* rng) {
  if (batch.size() == 0) throw ValidationError("gradients: empty batch");
  mlp_detail::check_input(model, batch.inputs.rows());
  return mlp_detail::gradients_at(model.layers, model.config, batch, rng);
}

// The same recurrence for any parameter type with vector arithmetic (a
// scalar, an Eigen vector). `grad` maps a point to its gradient.
template <class T, class Grad>
void nesterov_update(T& theta, T& velocity, double lr, double gamma, Grad&& grad) {
  const T lookahead = theta + gamma * velocity;
  velocity = gamma * velocity - lr * grad(lookahead);
  theta = theta + velocity;
}

// Lookahead Nesterov update: g at (theta + gamma v); v <- gamma v - lr g;
// theta <- theta + v. Returns the loss at the lookahead point.
inline double nesterov_step(MlpModel& model, const Batch& batch, double lr, Rng* rng) {
  if (batch.size() == 0) throw ValidationError("nesterov_step: empty batch");
  mlp_detail::check_input(model, batch.inputs.rows());
  const double gamma = model.config.momentum;
  LayerStack lookahead = model.layers;
  if (gamma != 0.0)
    for (std::size_t l = 0; l < lookahead.size(); ++l) {
      lookahead[l].weights += gamma * model.velocity[l].weights;
      lookahead[l].bias += gamma * model.velocity[l].bias;
    }
  const auto g = mlp_detail::gradients_at(lookahead, model.config, batch, rng);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& v = model.velocity[l];
    v.weights = gamma * v.weights - lr * g.grads[l].weights;
    v.bias = gamma * v.bias - lr * g.grads[l].bias;
    model.layers[l].weights += v.weights;
    model.layers[l].bias += v.bias;
  }
  return g.loss;
}

struct TrainingCurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_usefulness = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  MlpModel best;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_score = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrainingCurvePoint> curve;
};

// Scores a candidate model on validation data; NaN when undefined.
using EvalHook = std::function<double(const MlpModel&)>;

// Mini-batch Nesterov training with per-epoch seeded shuffles. After each
// epoch the hook scores the model and the best-scoring snapshot is kept
// (first one on ties; the last epoch if every score is NaN).
inline TrainResult train(MlpModel model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                         const EvalHook& eval_hook) {
  const auto& cfg = model.config;
  cfg.validate();
  if (labels.empty() || static_cast<std::size_t>(inputs.cols()) != labels.size())
    throw ValidationError("train: empty or mismatched training set");
  mlp_detail::check_input(model, inputs.rows());

  Rng rng{derive_seed(cfg.seed, 0x7472616e /* "tran" */)};
  std::vector<Eigen::Index> order(labels.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainResult result;
  result.best = model;
  double best = -std::numeric_limits<double>::infinity();
  Batch batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const Eigen::Index> idx(order.data() + start, end - start);
      batch.inputs = inputs(Eigen::all, std::vector<Eigen::Index>(idx.begin(), idx.end()));
      batch.labels.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) batch.labels[i] = labels[static_cast<std::size_t>(idx[i])];
      loss_sum += nesterov_step(model, batch, cfg.lr, &rng);
      ++n_batches;
    }
    TrainingCurvePoint pt{epoch, loss_sum / static_cast<double>(n_batches)};
    if (eval_hook) pt.val_usefulness = eval_hook(model);
    result.curve.push_back(pt);
    const bool scored = !std::isnan(pt.val_usefulness);
    if ((scored && pt.val_usefulness > best) || (!scored && best == -std::numeric_limits<double>::infinity())) {
      if (scored) best = pt.val_usefulness;
      result.best = model;
      result.best_epoch = epoch;
      result.best_score = pt.val_usefulness;
    }
  }
  return result;
}

struct Prediction {
  std::string sentence_id;
  std::string bank_id;
  Month month;
  double p_distress = 0.0;
};

// Inference-mode predictions for columns of `inputs`, keyed by `keys`.
inline std::vector<Prediction> predict(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                       std::span<const SampleKey> keys) {
  if (static_cast<std::size_t>(inputs.cols()) != keys.size()) throw ValidationError("predict: keys do not match inputs");
  const auto p = predict_proba(model, inputs);
  std::vector<Prediction> out;
  out.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i)
    out.push_back({keys[i].sentence_id, keys[i].bank_id, keys[i].month, p(static_cast<Eigen::Index>(i))});
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: "DMLP" container, version 1 (config, weights, velocities).

inline constexpr std::uint32_t kMlpFormatVersion = 1;

inline void save_checkpoint(const MlpModel& m, const std::filesystem::path& path) {
  auto out = io::open_out(path, true);
  io::put_header(out, "DMLP", kMlpFormatVersion);
  io::put_string(out, nlohmann::json(m.config).dump());
  auto put_stack = [&](const LayerStack& s) {
    io::put<std::uint64_t>(out, s.size());
    for (const auto& l : s) {
      io::put<std::uint64_t>(out, static_cast<std::uint64_t>(l.weights.rows()));
      io::put<std::uint64_t>(out, static_cast<std::uint64_t>(l.weights.cols()));
      io::put_doubles(out, l.weights.data(), static_cast<std::size_t>(l.weights.size()));
      io::put_doubles(out, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
  };
  put_stack(m.layers);
  put_stack(m.velocity);
  io::finish(out, path);
}

inline MlpModel load_checkpoint(const std::filesystem::path& path) {
  auto in = io::open_in(path, true);
  io::expect_header(in, "DMLP", kMlpFormatVersion);
  MlpModel m;
  m.config = nlohmann::json::parse(io::get_string(in)).get<MlpConfig>();
  m.config.validate();
  auto get_stack = [&] {
    LayerStack s(io::get<std::uint64_t>(in));
    for (auto& l : s) {
      const auto rows = static_cast<Eigen::Index>(io::get<std::uint64_t>(in));
      const auto cols = static_cast<Eigen::Index>(io::get<std::uint64_t>(in));
      l.weights.resize(rows, cols);
      l.bias.resize(rows);
      io::get_doubles(in, l.weights.data(), static_cast<std::size_t>(l.weights.size()));
      io::get_doubles(in, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return s;
  };
  m.layers = get_stack();
  m.velocity = get_stack();
  if (m.layers.size() != m.config.hidden_layers.size() + 1 || m.velocity.size() != m.layers.size())
    throw ParseError("checkpoint layer count does not match its config");
  return m;
}

inline void write_training_curve(const std::filesystem::path& path, std::span<const TrainingCurvePoint> curve) {
  auto out = io::open_out(path);
  out << "epoch,train_loss,val_usefulness\n";
  for (const auto& p : curve)
    out << p.epoch << ',' << io::format_double(p.train_loss) << ','
        << (std::isnan(p.val_usefulness) ? std::string("nan") : io::format_double(p.val_usefulness)) << '\n';
  io::finish(out, path);
}

}  // namespace distress
