#pragma once

// Monthly bank-level aggregation and the usefulness measures for early
// warning: baseline loss, model loss under error preference mu, and the
// absolute/relative usefulness derived from them.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distress/common.hpp"
#include "distress/fusion.hpp"
#include "distress/io.hpp"
#include "distress/neural.hpp"

namespace distress {

inline constexpr double kDefaultMu = 0.9;

struct MonthScore {
  std::string bank_id;
  Month month;
  double score = 0.0;
  std::size_t n_sentences = 0;
  int label = 0;
};

// 1 iff some distress window of the bank intersects the calendar month.
inline int month_label(const std::string& bank_id, const Month& month, std::span<const DistressEvent> events) {
  const Date first = month.first_day();
  const Date last = month.last_day();
  for (const auto& e : events)
    if (e.bank_id == bank_id && e.intersects(first, last)) return 1;
  return 0;
}

// One record per observed (bank, month), ordered by bank then month. Scores
// are summed in sorted order, so the result does not depend on input order.
inline std::vector<MonthScore> aggregate_monthly(std::span<const Prediction> predictions,
                                                 std::span<const DistressEvent> events) {
  std::map<std::pair<std::string, Month>, std::vector<double>> groups;
  for (const auto& p : predictions) groups[{p.bank_id, p.month}].push_back(p.p_distress);

  std::map<std::string, std::vector<DistressEvent>> by_bank;
  for (const auto& e : events) by_bank[e.bank_id].push_back(e);

  std::vector<MonthScore> out;
  out.reserve(groups.size());
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const auto it = by_bank.find(key.first);
    const int y = it == by_bank.end() ? 0 : month_label(key.first, key.second, it->second);
    out.push_back({key.first, key.second, sum / static_cast<double>(values.size()), values.size(), y});
  }
  return out;
}

struct ConfusionRates {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double p_tp = 0.0, p_fp = 0.0, p_tn = 0.0, p_fn = 0.0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double prior() const { return static_cast<double>(tp + fn) / static_cast<double>(total()); }

  static ConfusionRates from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    ConfusionRates c{tp, fp, tn, fn};
    const double n = static_cast<double>(c.total());
    if (n == 0) throw ValidationError("confusion: no observations");
    c.p_tp = static_cast<double>(tp) / n;
    c.p_fp = static_cast<double>(fp) / n;
    c.p_tn = static_cast<double>(tn) / n;
    c.p_fn = static_cast<double>(fn) / n;
    return c;
  }
};

// Signal (predict distress) iff score >= tau.
inline ConfusionRates confusion(std::span<const MonthScore> scores, double tau) {
  if (scores.empty()) throw ValidationError("confusion: empty score list");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& s : scores) {
    const bool signal = s.score >= tau;
    if (s.label == 1)
      (signal ? tp : fn)++;
    else
      (signal ? fp : tn)++;
  }
  return ConfusionRates::from_counts(tp, fp, tn, fn);
}

// L_b = min(mu * p1, (1 - mu) * (1 - p1)).
inline double baseline_loss(double p1, double mu) {
  if (!(p1 > 0.0 && p1 < 1.0)) throw ValidationError("baseline_loss: undefined baseline for prior " + std::to_string(p1));
  if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("baseline_loss: mu must lie in (0, 1)");
  return std::min(mu * p1, (1.0 - mu) * (1.0 - p1));
}

// L_m = mu * p(FN) + (1 - mu) * p(FP).
inline double model_loss(double p_fn, double p_fp, double mu) {
  if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("model_loss: mu must lie in (0, 1)");
  return mu * p_fn + (1.0 - mu) * p_fp;
}

inline double model_loss(const ConfusionRates& c, double mu) { return model_loss(c.p_fn, c.p_fp, mu); }

struct Usefulness {
  double absolute = 0.0;  // U_a = L_b - L_m
  double relative = 0.0;  // U_r = U_a / L_b
};

inline Usefulness relative_usefulness(double baseline, double model) {
  if (!(baseline > 0.0)) throw ValidationError("relative_usefulness: baseline loss must be positive");
  const double ua = baseline - model;
  return {ua, ua / baseline};
}

struct UsefulnessReport {
  double mu = kDefaultMu;
  double prior = 0.0;  // p(obs = 1)
  double threshold = 0.5;
  double baseline_loss = 0.0;
  double model_loss = 0.0;
  double absolute_usefulness = 0.0;
  double relative_usefulness = 0.0;
  ConfusionRates confusion;
};

inline UsefulnessReport usefulness_report(std::span<const MonthScore> scores, double tau, double mu = kDefaultMu) {
  UsefulnessReport r;
  r.mu = mu;
  r.threshold = tau;
  r.confusion = confusion(scores, tau);
  r.prior = r.confusion.prior();
  r.baseline_loss = baseline_loss(r.prior, mu);
  r.model_loss = model_loss(r.confusion, mu);
  const auto u = relative_usefulness(r.baseline_loss, r.model_loss);
  r.absolute_usefulness = u.absolute;
  r.relative_usefulness = u.relative;
  return r;
}

// Threshold maximizing U_r over {0, 1} and every distinct score; the
// smallest threshold wins ties.
inline double pick_threshold(std::span<const MonthScore> scores, double mu = kDefaultMu) {
  if (scores.empty()) throw ValidationError("pick_threshold: empty score list");
  std::size_t positives = 0;
  for (const auto& s : scores) positives += static_cast<std::size_t>(s.label == 1);
  if (positives == 0 || positives == scores.size())
    throw ValidationError("pick_threshold: usefulness undefined on a single-class set");

  std::set<double> candidates{0.0, 1.0};
  for (const auto& s : scores) candidates.insert(s.score);

  // Sweep candidates upward, moving records out of the signalled set as the
  // threshold passes their score.
  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(scores.size());
  for (const auto& s : scores) sorted.emplace_back(s.score, s.label);
  std::sort(sorted.begin(), sorted.end());

  const double n = static_cast<double>(scores.size());
  const double p1 = static_cast<double>(positives) / n;
  const double lb = baseline_loss(p1, mu);
  std::size_t below = 0, fn = 0, tn = 0;
  double best_tau = 0.0;
  double best_ur = -std::numeric_limits<double>::infinity();
  for (double tau : candidates) {
    while (below < sorted.size() && sorted[below].first < tau) {
      (sorted[below].second == 1 ? fn : tn)++;
      ++below;
    }
    const std::size_t fp = (scores.size() - positives) - tn;
    const double lm = model_loss(static_cast<double>(fn) / n, static_cast<double>(fp) / n, mu);
    const double ur = (lb - lm) / lb;
    if (ur > best_ur) {
      best_ur = ur;
      best_tau = tau;
    }
  }
  return best_tau;
}

// ---------------------------------------------------------------------------
// Exports

inline nlohmann::json to_json(const UsefulnessReport& r) {
  const auto& c = r.confusion;
  return {{"mu", r.mu},
          {"prior", r.prior},
          {"threshold", r.threshold},
          {"L_b", r.baseline_loss},
          {"L_m", r.model_loss},
          {"U_a", r.absolute_usefulness},
          {"U_r", r.relative_usefulness},
          {"confusion",
           {{"p_TP", c.p_tp}, {"p_FP", c.p_fp}, {"p_TN", c.p_tn}, {"p_FN", c.p_fn},
            {"TP", c.tp}, {"FP", c.fp}, {"TN", c.tn}, {"FN", c.fn}}}};
}

inline void write_month_scores(const std::filesystem::path& path, std::span<const MonthScore> scores) {
  auto out = io::open_out(path);
  out << "bank_id,month,score,n_sentences,label\n";
  for (const auto& s : scores)
    out << s.bank_id << ',' << to_string(s.month) << ',' << io::format_double(s.score) << ',' << s.n_sentences << ','
        << s.label << '\n';
  io::finish(out, path);
}

}  // namespace distress
