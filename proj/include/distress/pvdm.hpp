#pragma once

// Distributed-memory paragraph vectors. Each sentence owns a row of
// `paragraph_vectors`; the hidden state for a window is the mean of the n
// context word vectors and that row, and the following word is predicted
// with a negative-sampling objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distress/common.hpp"
#include "distress/corpus.hpp"
#include "distress/io.hpp"

namespace distress {

struct PvdmConfig {
  std::size_t vector_dim = 600;
  std::size_t window_n = 5;  // context words preceding the predicted word
  std::size_t negative_samples = 5;
  std::size_t epochs = 10;
  double lr_initial = 0.025;
  double lr_final = 1e-4;
  std::uint64_t seed = 1;

  void validate() const {
    if (vector_dim < 1) throw ValidationError("pvdm: vector_dim must be >= 1");
    if (window_n < 1) throw ValidationError("pvdm: window_n must be >= 1");
    if (negative_samples < 1) throw ValidationError("pvdm: negative_samples must be >= 1");
    if (!(lr_initial > 0.0) || !(lr_final > 0.0)) throw ValidationError("pvdm: learning rates must be positive");
    if (!(lr_final < lr_initial)) throw ValidationError("pvdm: lr_final must be below lr_initial");
  }
};

inline void to_json(nlohmann::json& j, const PvdmConfig& c) {
  j = {{"vector_dim", c.vector_dim}, {"window_n", c.window_n}, {"negative_samples", c.negative_samples},
       {"epochs", c.epochs},         {"lr_initial", c.lr_initial}, {"lr_final", c.lr_final},
       {"seed", c.seed}};
}

// Missing keys keep their current value, so a partial object is an override.
inline void from_json(const nlohmann::json& j, PvdmConfig& c) {
  c.vector_dim = j.value("vector_dim", c.vector_dim);
  c.window_n = j.value("window_n", c.window_n);
  c.negative_samples = j.value("negative_samples", c.negative_samples);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_initial = j.value("lr_initial", c.lr_initial);
  c.lr_final = j.value("lr_final", c.lr_final);
  c.seed = j.value("seed", c.seed);
}

struct SemanticVector {
  std::string sentence_id;
  std::vector<double> values;
};

class PvdmModel {
 public:
  PvdmConfig config;
  Vocabulary vocab;
  // Row-major |V| x dim, |V| x dim and |S| x dim.
  std::vector<double> word_in_vectors;
  std::vector<double> word_out_vectors;
  std::vector<double> paragraph_vectors;

  std::size_t dim() const { return config.vector_dim; }
  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t sentence_count() const { return sentence_ids_.size(); }
  const std::vector<std::string>& sentence_ids() const { return sentence_ids_; }

  std::span<double> word_in(std::size_t w) { return {word_in_vectors.data() + w * dim(), dim()}; }
  std::span<const double> word_in(std::size_t w) const { return {word_in_vectors.data() + w * dim(), dim()}; }
  std::span<double> word_out(std::size_t w) { return {word_out_vectors.data() + w * dim(), dim()}; }
  std::span<const double> word_out(std::size_t w) const { return {word_out_vectors.data() + w * dim(), dim()}; }
  std::span<double> paragraph(std::size_t row) { return {paragraph_vectors.data() + row * dim(), dim()}; }
  std::span<const double> paragraph(std::size_t row) const {
    return {paragraph_vectors.data() + row * dim(), dim()};
  }

  std::size_t row_of(const std::string& sentence_id) const {
    const auto it = sentence_index_.find(sentence_id);
    if (it == sentence_index_.end()) throw LookupError("unknown sentence_id '" + sentence_id + "'");
    return it->second;
  }
  bool contains(const std::string& sentence_id) const { return sentence_index_.contains(sentence_id); }

  void set_sentence_ids(std::vector<std::string> ids) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!index.emplace(ids[i], i).second) throw ValidationError("duplicate sentence_id '" + ids[i] + "'");
    sentence_ids_ = std::move(ids);
    sentence_index_ = std::move(index);
  }

  bool all_finite() const {
    auto finite = [](const std::vector<double>& m) {
      return std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); });
    };
    return finite(word_in_vectors) && finite(word_out_vectors) && finite(paragraph_vectors);
  }

 private:
  std::vector<std::string> sentence_ids_;
  std::unordered_map<std::string, std::size_t> sentence_index_;
};

inline PvdmModel init_model(Vocabulary vocab, std::span<const Sentence> sentences, const PvdmConfig& config) {
  config.validate();
  if (sentences.empty()) throw ValidationError("init_model: empty sentence list");
  PvdmModel m;
  m.config = config;
  m.vocab = std::move(vocab);
  std::vector<std::string> ids;
  ids.reserve(sentences.size());
  for (const auto& s : sentences) ids.push_back(s.sentence_id);
  m.set_sentence_ids(std::move(ids));

  const std::size_t dim = config.vector_dim;
  const double half_width = 0.5 / static_cast<double>(dim);
  Rng rng{derive_seed(config.seed, 0x696e6974 /* "init" */)};
  m.word_in_vectors.resize(m.vocab.size() * dim);
  for (auto& v : m.word_in_vectors) v = uniform(rng, -half_width, half_width);
  m.paragraph_vectors.resize(sentences.size() * dim);
  for (auto& v : m.paragraph_vectors) v = uniform(rng, -half_width, half_width);
  m.word_out_vectors.assign(m.vocab.size() * dim, 0.0);
  return m;
}

namespace pvdm_detail {

// -log(sigmoid(x)), stable for large |x|.
inline double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void check_position(std::size_t n_tokens, std::size_t position, std::size_t window_n) {
  if (position + window_n >= n_tokens)
    throw ValidationError("train_step: position " + std::to_string(position) + " leaves no target for window " +
                          std::to_string(window_n) + " in " + std::to_string(n_tokens) + " tokens");
}

}  // namespace pvdm_detail

// Number of (position) windows a sentence of `n_tokens` contributes.
inline std::size_t trainable_positions(std::size_t n_tokens, std::size_t window_n) {
  return n_tokens > window_n ? n_tokens - window_n : 0;
}

// k noise words for one prediction; a draw equal to the target is redrawn.
inline std::vector<std::size_t> sample_negatives(const Vocabulary& vocab, std::size_t target, std::size_t k,
                                                 Rng& rng) {
  std::vector<std::size_t> out(k);
  for (auto& w : out) {
    w = vocab.sample_noise(rng);
    for (int attempt = 0; w == target && attempt < 16; ++attempt) w = vocab.sample_noise(rng);
  }
  return out;
}

// Loss and full gradient of one negative-sampling prediction, without
// touching the model. Used for training and for finite-difference checks.
struct StepGradient {
  double loss = 0.0;
  std::vector<double> hidden;                                      // h
  std::vector<double> paragraph;                                   // dL/d paragraph row
  std::vector<std::pair<std::size_t, std::vector<double>>> words_in;   // dL/d word_in[w], one entry per distinct w
  std::vector<std::pair<std::size_t, std::vector<double>>> words_out;  // dL/d word_out[w], one entry per distinct w
};

inline StepGradient evaluate_step(const PvdmModel& model, std::span<const double> paragraph,
                                  std::span<const std::size_t> ids, std::size_t position,
                                  std::span<const std::size_t> negatives, bool need_word_grads = true) {
  const std::size_t n = model.config.window_n;
  const std::size_t dim = model.dim();
  pvdm_detail::check_position(ids.size(), position, n);
  const double inv_terms = 1.0 / static_cast<double>(n + 1);

  StepGradient g;
  g.hidden.assign(paragraph.begin(), paragraph.end());
  for (std::size_t j = 0; j < n; ++j) {
    const auto v = model.word_in(ids[position + j]);
    for (std::size_t d = 0; d < dim; ++d) g.hidden[d] += v[d];
  }
  for (auto& x : g.hidden) x *= inv_terms;

  std::vector<double> grad_h(dim, 0.0);
  auto accumulate_out = [&](std::size_t w, double coeff) {
    if (!need_word_grads) return;
    auto it = std::find_if(g.words_out.begin(), g.words_out.end(), [&](const auto& e) { return e.first == w; });
    if (it == g.words_out.end()) {
      g.words_out.emplace_back(w, std::vector<double>(dim, 0.0));
      it = std::prev(g.words_out.end());
    }
    for (std::size_t d = 0; d < dim; ++d) it->second[d] += coeff * g.hidden[d];
  };
  auto score = [&](std::size_t w, double label) {
    const auto u = model.word_out(w);
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += u[d] * g.hidden[d];
    g.loss += label > 0 ? pvdm_detail::neg_log_sigmoid(s) : pvdm_detail::neg_log_sigmoid(-s);
    const double coeff = pvdm_detail::sigmoid(s) - label;
    for (std::size_t d = 0; d < dim; ++d) grad_h[d] += coeff * u[d];
    accumulate_out(w, coeff);
  };
  score(ids[position + n], 1.0);
  for (auto w : negatives) score(w, 0.0);

  g.paragraph.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) g.paragraph[d] = grad_h[d] * inv_terms;
  if (need_word_grads) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t w = ids[position + j];
      auto it = std::find_if(g.words_in.begin(), g.words_in.end(), [&](const auto& e) { return e.first == w; });
      if (it == g.words_in.end()) {
        g.words_in.emplace_back(w, std::vector<double>(dim, 0.0));
        it = std::prev(g.words_in.end());
      }
      for (std::size_t d = 0; d < dim; ++d) it->second[d] += g.paragraph[d];
    }
  }
  return g;
}

// Loss only; the objective evaluated by finite differences.
inline double step_loss(const PvdmModel& model, std::span<const double> paragraph, std::span<const std::size_t> ids,
                        std::size_t position, std::span<const std::size_t> negatives) {
  return evaluate_step(model, paragraph, ids, position, negatives, false).loss;
}

namespace pvdm_detail {

inline void axpy(std::span<double> y, double a, std::span<const double> x) {
  for (std::size_t d = 0; d < y.size(); ++d) y[d] += a * x[d];
}

// One SGD step from precomputed negatives; the full gradient is formed
// before any parameter moves.
inline double apply_step(PvdmModel& model, std::span<double> paragraph, std::span<const std::size_t> ids,
                         std::size_t position, std::span<const std::size_t> negatives, double lr) {
  const auto g = evaluate_step(model, paragraph, ids, position, negatives, true);
  for (const auto& [w, grad] : g.words_out) axpy(model.word_out(w), -lr, grad);
  for (const auto& [w, grad] : g.words_in) axpy(model.word_in(w), -lr, grad);
  axpy(paragraph, -lr, g.paragraph);
  return g.loss;
}

}  // namespace pvdm_detail

// One stochastic step on sentence row `row`: context ids[position ..
// position+n), target ids[position+n]. Returns the pre-update loss.
inline double train_step(PvdmModel& model, std::size_t row, std::span<const std::size_t> ids, std::size_t position,
                         double lr, Rng& rng) {
  pvdm_detail::check_position(ids.size(), position, model.config.window_n);
  const auto negatives =
      sample_negatives(model.vocab, ids[position + model.config.window_n], model.config.negative_samples, rng);
  return pvdm_detail::apply_step(model, model.paragraph(row), ids, position, negatives, lr);
}

inline double train_step(PvdmModel& model, const Sentence& sentence, std::size_t position, double lr, Rng& rng) {
  const auto ids = model.vocab.encode(sentence.tokens);
  return train_step(model, model.row_of(sentence.sentence_id), ids, position, lr, rng);
}

struct PvdmTrainReport {
  std::vector<double> epoch_mean_loss;
  std::size_t steps_per_epoch = 0;
};

// Epoch loop over every valid (sentence, position) pair in seeded-shuffled
// order, with the learning rate decayed linearly over all steps.
inline PvdmTrainReport train(PvdmModel& model, std::span<const Sentence> sentences) {
  const auto& cfg = model.config;
  cfg.validate();
  const std::size_t n = cfg.window_n;

  std::vector<std::size_t> rows;
  std::vector<std::vector<std::size_t>> encoded;
  rows.reserve(sentences.size());
  encoded.reserve(sentences.size());
  for (const auto& s : sentences) {
    rows.push_back(model.row_of(s.sentence_id));
    encoded.push_back(model.vocab.encode(s.tokens));
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (sentence, position)
  for (std::size_t i = 0; i < encoded.size(); ++i)
    for (std::size_t p = 0; p < trainable_positions(encoded[i].size(), n); ++p)
      pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(p));

  PvdmTrainReport report;
  report.steps_per_epoch = pairs.size();
  if (cfg.epochs == 0 || pairs.empty()) return report;

  Rng rng{derive_seed(cfg.seed, 0x7472616e /* "tran" */)};
  const double total = static_cast<double>(pairs.size() * cfg.epochs);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(pairs, rng);
    double sum = 0.0;
    for (const auto& [i, p] : pairs) {
      const double lr = cfg.lr_initial - (cfg.lr_initial - cfg.lr_final) * (static_cast<double>(step) / total);
      sum += train_step(model, rows[i], encoded[i], p, lr, rng);
      ++step;
    }
    report.epoch_mean_loss.push_back(sum / static_cast<double>(pairs.size()));
  }
  return report;
}

inline SemanticVector paragraph_vector(const PvdmModel& model, const std::string& sentence_id) {
  const auto row = model.paragraph(model.row_of(sentence_id));
  return {sentence_id, std::vector<double>(row.begin(), row.end())};
}

// Fits a fresh paragraph vector for unseen tokens against frozen word
// matrices: `steps` sweeps over the windows, learning rate decayed linearly
// from `lr` to the model's lr_final.
inline SemanticVector infer_vector(const PvdmModel& model, std::span<const std::string> tokens, std::size_t steps,
                                   double lr, std::uint64_t seed, std::string sentence_id = {}) {
  const std::size_t n = model.config.window_n;
  const auto ids = model.vocab.encode(tokens);
  const std::size_t positions = trainable_positions(ids.size(), n);
  if (positions == 0) throw ValidationError("infer_vector: no trainable context");

  Rng rng{seed};
  const std::size_t dim = model.dim();
  const double half_width = 0.5 / static_cast<double>(dim);
  std::vector<double> para(dim);
  for (auto& v : para) v = uniform(rng, -half_width, half_width);

  const double total = static_cast<double>(steps * positions);
  std::size_t step = 0;
  std::vector<std::size_t> order(positions);
  for (std::size_t s = 0; s < steps; ++s) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    for (auto p : order) {
      const double rate = lr - (lr - std::min(lr, model.config.lr_final)) * (static_cast<double>(step) / total);
      const auto negatives = sample_negatives(model.vocab, ids[p + n], model.config.negative_samples, rng);
      const auto g = evaluate_step(model, para, ids, p, negatives, false);
      pvdm_detail::axpy(para, -rate, g.paragraph);
      ++step;
    }
  }
  return {std::move(sentence_id), std::move(para)};
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double cosine(const SemanticVector& a, const SemanticVector& b) { return cosine(a.values, b.values); }

// ---------------------------------------------------------------------------
// Persistence: "PVDM" container, version 1. Matrices are stored as raw
// doubles so a round trip is bit-exact.

inline constexpr std::uint32_t kPvdmFormatVersion = 1;

inline void save_model(const PvdmModel& m, const std::filesystem::path& path) {
  auto out = io::open_out(path, true);
  io::put_header(out, "PVDM", kPvdmFormatVersion);
  const auto& c = m.config;
  for (std::uint64_t v : {std::uint64_t{c.vector_dim}, std::uint64_t{c.window_n}, std::uint64_t{c.negative_samples},
                          std::uint64_t{c.epochs}})
    io::put(out, v);
  io::put(out, c.lr_initial);
  io::put(out, c.lr_final);
  io::put(out, c.seed);
  io::put<std::uint64_t>(out, m.vocab.min_count());
  io::put(out, m.vocab.noise_power());
  io::put<std::uint64_t>(out, m.vocab.size());
  for (std::size_t i = 0; i < m.vocab.size(); ++i) {
    io::put_string(out, m.vocab.token(i));
    io::put<std::uint64_t>(out, m.vocab.count(i));
  }
  io::put<std::uint64_t>(out, m.sentence_count());
  for (const auto& id : m.sentence_ids()) io::put_string(out, id);
  io::put_doubles(out, m.word_in_vectors.data(), m.word_in_vectors.size());
  io::put_doubles(out, m.word_out_vectors.data(), m.word_out_vectors.size());
  io::put_doubles(out, m.paragraph_vectors.data(), m.paragraph_vectors.size());
  io::finish(out, path);
}

inline PvdmModel load_model(const std::filesystem::path& path) {
  auto in = io::open_in(path, true);
  io::expect_header(in, "PVDM", kPvdmFormatVersion);
  PvdmModel m;
  auto& c = m.config;
  c.vector_dim = io::get<std::uint64_t>(in);
  c.window_n = io::get<std::uint64_t>(in);
  c.negative_samples = io::get<std::uint64_t>(in);
  c.epochs = io::get<std::uint64_t>(in);
  c.lr_initial = io::get<double>(in);
  c.lr_final = io::get<double>(in);
  c.seed = io::get<std::uint64_t>(in);
  c.validate();
  const auto min_count = io::get<std::uint64_t>(in);
  const auto power = io::get<double>(in);
  const auto n_vocab = io::get<std::uint64_t>(in);
  std::vector<std::string> tokens(n_vocab);
  std::vector<std::uint64_t> counts(n_vocab);
  for (std::size_t i = 0; i < n_vocab; ++i) {
    tokens[i] = io::get_string(in);
    counts[i] = io::get<std::uint64_t>(in);
  }
  m.vocab = Vocabulary::restore(std::move(tokens), std::move(counts), min_count, power);
  const auto n_sent = io::get<std::uint64_t>(in);
  std::vector<std::string> ids(n_sent);
  for (auto& id : ids) id = io::get_string(in);
  m.set_sentence_ids(std::move(ids));
  m.word_in_vectors.resize(n_vocab * c.vector_dim);
  m.word_out_vectors.resize(n_vocab * c.vector_dim);
  m.paragraph_vectors.resize(n_sent * c.vector_dim);
  io::get_doubles(in, m.word_in_vectors.data(), m.word_in_vectors.size());
  io::get_doubles(in, m.word_out_vectors.data(), m.word_out_vectors.size());
  io::get_doubles(in, m.paragraph_vectors.data(), m.paragraph_vectors.size());
  return m;
}

inline void write_paragraph_vectors(const std::filesystem::path& path, const PvdmModel& m) {
  auto out = io::open_out(path);
  for (std::size_t r = 0; r < m.sentence_count(); ++r) {
    const auto row = m.paragraph(r);
    out << nlohmann::json{{"sentence_id", m.sentence_ids()[r]}, {"values", std::vector<double>(row.begin(), row.end())}}
               .dump()
        << '\n';
  }
  io::finish(out, path);
}

inline std::vector<SemanticVector> read_paragraph_vectors(const std::filesystem::path& path) {
  std::vector<SemanticVector> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& row, std::size_t) {
    out.push_back({row.at("sentence_id").get<std::string>(), row.at("values").get<std::vector<double>>()});
  });
  return out;
}

}  // namespace distress
