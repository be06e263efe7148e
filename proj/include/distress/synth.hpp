#pragma once

// Seeded synthetic bank-distress datasets: a bank registry, month-aligned
// distress windows, template news articles whose wording depends on the
// bank's state, and quarterly indicators shifted under distress. Signal
// strength is tunable per modality.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distress/common.hpp"
#include "distress/corpus.hpp"
#include "distress/fusion.hpp"
#include "distress/io.hpp"

namespace distress {

namespace synth_defaults {

// Template syntax: {lead} is a shared capitalized opener, {bank} the
// canonical name, {a|b|c} picks one option, {num} a number, {filler} a run of
// shared filler words.
inline std::vector<std::string> lead_ins() {
  return {"According to people familiar with the matter",
          "In a statement released on {monday|tuesday|wednesday|thursday|friday}",
          "Analysts said on {monday|tuesday|wednesday|thursday|friday} that",
          "Sources told reporters late on {monday|tuesday|wednesday|thursday|friday} that",
          "As markets closed in {london|frankfurt|paris|madrid|milan}",
          "In early trading on the {euro|european|regional} markets"};
}

// Distress vocabulary; tranquil bad-news templates borrow from it, so text
// evidence is noisy by construction.
inline const std::string kAdverseNoun =
    "{bailout|losses|default|rescue|insolvency|shortfall|downgrade|writedowns|recapitalisation|nationalisation}";

inline std::vector<std::string> tranquil_templates() {
  const std::string noun = "{profit|earnings|dividend|growth|expansion|lending|deposits|branches|upgrade|hiring}";
  const std::string verb = "{reported|raised|expanded|opened|announced|lifted|grew|hired}";
  return {
      "{lead} {bank} " + verb + " " + noun + " {filler} " + noun + " {filler}.",
      "{lead} {bank} " + verb + " its " + noun + " {filler} and " + noun + " {filler}.",
      "{lead} {bank} said " + noun + " rose {num} percent {filler} " + noun + " {filler}.",
      "{lead} {bank} " + verb + " a new {chief|finance|risk} {officer|director|head} {filler} " + noun + " {filler}.",
      "{lead} {bank} {cut|sold|trimmed} {num} jobs {filler} " + noun + " {filler}.",
      "{lead} {bank} shares {fell|slipped|dropped} {num} percent {filler} " + kAdverseNoun + " {filler}.",
      "{lead} {bank} {disclosed|warned of|reported} " + kAdverseNoun + " {filler} " + noun + " {filler}.",
      "{lead} {bank} said " + kAdverseNoun + " {fears|concerns} eased {filler} " + noun + " {filler}.",
  };
}

inline std::vector<std::string> distress_templates() {
  const std::string noun = "{profit|earnings|dividend|growth|expansion|lending|deposits|branches|upgrade|hiring}";
  const std::string mixed = "{losses|default|insolvency|shortfall|writedowns|profit|earnings|growth|lending|deposits}";
  return {
      "{lead} {bank} shares {fell|slipped|dropped} {num} percent {filler} " + kAdverseNoun + " {filler}.",
      "{lead} {bank} {disclosed|warned of|reported} " + kAdverseNoun + " {filler} " + mixed + " {filler}.",
      "{lead} {bank} said " + kAdverseNoun + " {fears|concerns} eased {filler} " + noun + " {filler}.",
  };
}

inline std::vector<std::string> filler_lexicon() {
  return {"according", "to",       "people",    "familiar", "with",     "the",       "matter",   "analysts",
          "said",      "on",       "monday",    "tuesday",  "wednesday", "thursday", "friday",   "in",
          "a",         "statement", "after",    "markets",  "closed",   "as",        "investors", "weighed",
          "the",       "outlook",  "for",       "european", "lenders",  "this",      "week",     "sources",
          "told",      "reporters", "while",    "officials", "declined", "comment",  "amid",     "broader",
          "sector",    "moves",    "euro",      "zone",     "regulators", "watched", "closely",  "late",
          "trading",   "early",    "session",   "its",      "chief",    "executive", "told",     "staff",
          "of",        "group",    "said",      "spokesman", "by",      "phone",     "from",     "london"};
}

inline std::vector<std::string> name_stems() {
  return {"Ald",  "Bren", "Cors", "Dal",  "Elm",  "Fen",  "Gar",  "Hal",  "Ist",  "Jor",  "Kel",  "Lun",
          "Mor",  "Nest", "Orm",  "Pel",  "Quar", "Ros",  "Sil",  "Tor",  "Ulm",  "Ver",  "Wes",  "Yar",
          "Zel",  "Arn",  "Bod",  "Cal",  "Dun",  "Eis",  "Frey", "Grim", "Hov",  "Ivar", "Jut",  "Kor"};
}

inline std::vector<std::string> name_endings() { return {"mark", "vik", "ford", "berg", "holm", "stad"}; }

inline std::vector<std::string> name_kinds() { return {"Bank", "Sparkasse", "Banca", "Savings Bank", "Kredit"}; }

inline std::vector<std::string> countries() {
  return {"DE", "FR", "IT", "ES", "NL", "BE", "AT", "IE", "GR", "PT", "DK", "SE", "FI", "CY", "SI", "HU", "LU", "GB"};
}

// Location and scale of each raw indicator (in Table-1 column order).
inline constexpr std::array<double, kIndicatorCount> kLocation = {2.5,   3.4, 4.2,   0.2,   -12.0, 385.0,
                                                                  -2.5,  -21.0, 188.2, 0.0,  140.2, 13.7};
inline constexpr std::array<double, kIndicatorCount> kScale = {3.2,  2.9,  2.9,  1.3,  1158.5, 366.6,
                                                               5.8,  54.5, 70.3, 3.4,  51.2,   21.9};
// Direction of the distress shift; 0 marks a pure-noise indicator.
inline constexpr std::array<int, kIndicatorCount> kShiftSign = {-1, +1, +1, 0, 0, 0, -1, 0, +1, +1, 0, 0};

}  // namespace synth_defaults

struct SynthConfig {
  std::size_t n_banks = 62;
  Quarter first_quarter{2007, 1};
  Quarter last_quarter{2014, 3};
  int sentences_min = 5;  // per bank-quarter
  int sentences_max = 40;
  double distress_prior = 0.07;
  double text_signal = 0.3;
  double numeric_signal = 0.6;
  double shift_delta = 1.0;
  int window_min_months = 3;
  int window_max_months = 18;
  std::size_t min_banks = 5;  // fold count the dataset must support
  std::vector<std::string> tranquil_templates = synth_defaults::tranquil_templates();
  std::vector<std::string> distress_templates = synth_defaults::distress_templates();
  std::vector<std::string> filler = synth_defaults::filler_lexicon();
  std::vector<std::string> lead_ins = synth_defaults::lead_ins();
  std::uint64_t seed = 7;

  std::size_t n_months() const {
    return static_cast<std::size_t>((last_quarter.index() - first_quarter.index() + 1) * 3);
  }

  void validate() const {
    if (n_banks < min_banks || n_banks < 1)
      throw ValidationError("synth: n_banks must be at least " + std::to_string(min_banks));
    if (last_quarter < first_quarter) throw ValidationError("synth: quarter span is empty");
    if (sentences_min < 1 || sentences_max < sentences_min) throw ValidationError("synth: bad sentence range");
    if (!(distress_prior > 0.0 && distress_prior < 1.0)) throw ValidationError("synth: prior must lie in (0, 1)");
    if (!(text_signal >= 0.0 && text_signal <= 1.0)) throw ValidationError("synth: text_signal must lie in [0, 1]");
    if (!(numeric_signal >= 0.0 && numeric_signal <= 1.0))
      throw ValidationError("synth: numeric_signal must lie in [0, 1]");
    if (!(shift_delta >= 0.0)) throw ValidationError("synth: shift_delta must be >= 0");
    if (window_min_months < 1 || window_max_months < window_min_months)
      throw ValidationError("synth: bad window length range");
    if (tranquil_templates.empty() || distress_templates.empty() || filler.empty() || lead_ins.empty())
      throw ValidationError("synth: templates, lead-ins and filler lexicon must be non-empty");
  }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"n_banks", c.n_banks},
       {"first_quarter", to_string(c.first_quarter)},
       {"last_quarter", to_string(c.last_quarter)},
       {"sentences_min", c.sentences_min},
       {"sentences_max", c.sentences_max},
       {"distress_prior", c.distress_prior},
       {"text_signal", c.text_signal},
       {"numeric_signal", c.numeric_signal},
       {"shift_delta", c.shift_delta},
       {"window_min_months", c.window_min_months},
       {"window_max_months", c.window_max_months},
       {"min_banks", c.min_banks},
       {"tranquil_templates", c.tranquil_templates},
       {"distress_templates", c.distress_templates},
       {"filler", c.filler},
       {"lead_ins", c.lead_ins},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  c.n_banks = j.value("n_banks", c.n_banks);
  if (j.contains("first_quarter")) c.first_quarter = parse_quarter(j["first_quarter"].get<std::string>());
  if (j.contains("last_quarter")) c.last_quarter = parse_quarter(j["last_quarter"].get<std::string>());
  c.sentences_min = j.value("sentences_min", c.sentences_min);
  c.sentences_max = j.value("sentences_max", c.sentences_max);
  c.distress_prior = j.value("distress_prior", c.distress_prior);
  c.text_signal = j.value("text_signal", c.text_signal);
  c.numeric_signal = j.value("numeric_signal", c.numeric_signal);
  c.shift_delta = j.value("shift_delta", c.shift_delta);
  c.window_min_months = j.value("window_min_months", c.window_min_months);
  c.window_max_months = j.value("window_max_months", c.window_max_months);
  c.min_banks = j.value("min_banks", c.min_banks);
  c.tranquil_templates = j.value("tranquil_templates", c.tranquil_templates);
  c.distress_templates = j.value("distress_templates", c.distress_templates);
  c.filler = j.value("filler", c.filler);
  c.lead_ins = j.value("lead_ins", c.lead_ins);
  c.seed = j.value("seed", c.seed);
}

struct SyntheticDataset {
  SynthConfig config;
  std::vector<BankEntity> registry;
  std::vector<Article> articles;
  std::vector<DistressEvent> events;
  std::vector<QuarterlyIndicators> indicators;
  // distressed[bank][m] for month m counted from config.first_quarter.
  std::vector<std::vector<std::uint8_t>> distressed;
  // Template id of every sentence of every article, by article index and
  // sentence ordinal: [0, T) tranquil, [T, T+D) distress.
  std::vector<std::vector<int>> sentence_templates;
  std::size_t bank_sentences = 0;

  Month month_at(std::size_t m) const {
    return Month::from_index(config.first_quarter.first_month().index() + static_cast<int>(m));
  }
  std::size_t month_offset(const Month& m) const {
    return static_cast<std::size_t>(m.index() - config.first_quarter.first_month().index());
  }
  bool is_distress_template(int id) const {
    return id >= static_cast<int>(config.tranquil_templates.size());
  }
};

namespace synth_detail {

inline std::string render(std::string_view tmpl, const SynthConfig& cfg, const std::string& bank_name, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      out.push_back(tmpl[i++]);
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos) throw ValidationError("synth: unbalanced template '" + std::string(tmpl) + "'");
    const auto slot = tmpl.substr(i + 1, close - i - 1);
    i = close + 1;
    if (slot == "bank") {
      out += bank_name;
    } else if (slot == "lead") {
      out += render(cfg.lead_ins[uniform_index(rng, cfg.lead_ins.size())], cfg, bank_name, rng);
    } else if (slot == "num") {
      out += std::to_string(uniform_int(rng, 2, 95));
    } else if (slot == "filler") {
      const int n = uniform_int(rng, 3, 7);
      for (int k = 0; k < n; ++k) {
        if (k) out.push_back(' ');
        out += cfg.filler[uniform_index(rng, cfg.filler.size())];
      }
    } else {
      std::vector<std::string_view> options;
      std::size_t start = 0;
      while (true) {
        const auto bar = slot.find('|', start);
        options.push_back(slot.substr(start, bar == std::string_view::npos ? bar : bar - start));
        if (bar == std::string_view::npos) break;
        start = bar + 1;
      }
      out += options[uniform_index(rng, options.size())];
    }
  }
  return out;
}

inline std::vector<std::string> bank_names(std::size_t n, Rng& rng) {
  std::vector<std::string> pool;
  for (const auto& stem : synth_defaults::name_stems())
    for (const auto& end : synth_defaults::name_endings()) pool.push_back(stem + end);
  shuffle(pool, rng);
  std::vector<std::string> names;
  std::set<std::string> lowered;
  const auto kinds = synth_defaults::name_kinds();
  for (const auto& word : pool) {
    if (names.size() == n) break;
    std::string name = word + " " + kinds[uniform_index(rng, kinds.size())];
    std::string low = name;
    std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
    // Reject names that contain, or are contained in, an accepted one.
    const bool clash = std::any_of(lowered.begin(), lowered.end(), [&](const std::string& other) {
      return other.find(low) != std::string::npos || low.find(other) != std::string::npos;
    });
    if (clash) continue;
    lowered.insert(low);
    names.push_back(std::move(name));
  }
  if (names.size() < n) throw ValidationError("synth: cannot name " + std::to_string(n) + " distinct banks");
  return names;
}

// Places month-aligned windows (0-2 per bank, non-overlapping, at least one
// tranquil month apart) until exactly round(prior * banks * months) bank-months
// are distressed.
inline std::vector<std::vector<std::uint8_t>> place_windows(const SynthConfig& cfg, Rng& rng) {
  const std::size_t months = cfg.n_months();
  const auto target = static_cast<std::size_t>(
      std::llround(cfg.distress_prior * static_cast<double>(cfg.n_banks * months)));
  if (target == 0) throw ValidationError("synth: prior too small to place any distress month");
  const std::size_t per_bank_cap = std::min<std::size_t>(months, 2 * static_cast<std::size_t>(cfg.window_max_months));
  if (target > per_bank_cap * cfg.n_banks)
    throw ValidationError("synth: distress prior infeasible for the span (at most 2 windows of " +
                          std::to_string(cfg.window_max_months) + " months per bank)");

  std::vector<std::vector<std::uint8_t>> state(cfg.n_banks, std::vector<std::uint8_t>(months, 0));
  std::vector<std::size_t> order(cfg.n_banks);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);

  std::vector<int> windows(cfg.n_banks, 0);
  std::size_t remaining = target;
  for (std::size_t pass = 0; pass < 2 && remaining > 0; ++pass) {
    for (auto b : order) {
      if (remaining == 0) break;
      auto& row = state[b];
      // The first pass gives a bank one or two windows; the second tops up
      // banks that still have room.
      const int wanted = pass == 0 ? uniform_int(rng, 1, 2) : 2 - windows[b];
      for (int w = 0; w < wanted && remaining > 0; ++w) {
        std::size_t len = static_cast<std::size_t>(uniform_int(rng, cfg.window_min_months, cfg.window_max_months));
        len = std::min({len, remaining, months});
        std::vector<std::size_t> starts;
        for (std::size_t s = 0; s + len <= months; ++s) {
          bool ok = true;
          for (std::size_t m = (s ? s - 1 : 0); m < std::min(months, s + len + 1) && ok; ++m) ok = row[m] == 0;
          if (ok) starts.push_back(s);
        }
        if (starts.empty()) break;
        const std::size_t s = starts[uniform_index(rng, starts.size())];
        for (std::size_t m = s; m < s + len; ++m) row[m] = 1;
        remaining -= len;
        ++windows[b];
      }
    }
  }
  if (remaining > 0) throw ValidationError("synth: could not place the requested distress prior");
  return state;
}

}  // namespace synth_detail

inline SyntheticDataset generate(const SynthConfig& config) {
  config.validate();
  SyntheticDataset ds;
  ds.config = config;
  const std::size_t months = config.n_months();
  const std::size_t n_quarters = months / 3;

  Rng name_rng{derive_seed(config.seed, 1)};
  const auto names = synth_detail::bank_names(config.n_banks, name_rng);
  const auto countries = synth_defaults::countries();
  for (std::size_t b = 0; b < config.n_banks; ++b) {
    char id[16];
    std::snprintf(id, sizeof id, "bank%03zu", b + 1);
    ds.registry.push_back(make_bank_entity(id, names[b], countries[uniform_index(name_rng, countries.size())],
                                           {detail::escape_regex(names[b])}));
  }

  Rng window_rng{derive_seed(config.seed, 2)};
  ds.distressed = synth_detail::place_windows(config, window_rng);
  for (std::size_t b = 0; b < config.n_banks; ++b) {
    const auto& row = ds.distressed[b];
    for (std::size_t m = 0; m < months;) {
      if (!row[m]) {
        ++m;
        continue;
      }
      std::size_t end = m;
      while (end + 1 < months && row[end + 1]) ++end;
      const auto kind = static_cast<EventKind>(uniform_index(window_rng, 3));
      ds.events.push_back({ds.registry[b].bank_id, ds.month_at(m).first_day(), ds.month_at(end).last_day(), kind});
      m = end + 1;
    }
  }

  // Indicators: latent N(0,1) per bank-quarter plus a shift proportional to
  // the distressed fraction of the quarter, mapped to each column's scale.
  Rng ind_rng{derive_seed(config.seed, 3)};
  for (std::size_t b = 0; b < config.n_banks; ++b) {
    Quarter q = config.first_quarter;
    for (std::size_t qi = 0; qi < n_quarters; ++qi, q = q.next()) {
      double frac = 0.0;
      for (std::size_t m = qi * 3; m < qi * 3 + 3; ++m) frac += ds.distressed[b][m];
      frac /= 3.0;
      QuarterlyIndicators row{ds.registry[b].bank_id, q, {}};
      for (std::size_t j = 0; j < kIndicatorCount; ++j) {
        const double shift = synth_defaults::kShiftSign[j] * config.shift_delta * config.numeric_signal * frac;
        row.values[j] = synth_defaults::kLocation[j] + synth_defaults::kScale[j] * (normal(ind_rng) + shift);
      }
      ds.indicators.push_back(std::move(row));
    }
  }

  // Articles: per bank-quarter a uniform sentence budget, packed into
  // articles of 1-3 sentences about that bank.
  Rng text_rng{derive_seed(config.seed, 4)};
  const int n_tranquil = static_cast<int>(config.tranquil_templates.size());
  const int n_distress = static_cast<int>(config.distress_templates.size());
  for (std::size_t b = 0; b < config.n_banks; ++b) {
    const auto& bank = ds.registry[b];
    std::size_t seq = 0;
    for (std::size_t qi = 0; qi < n_quarters; ++qi) {
      int budget = uniform_int(text_rng, config.sentences_min, config.sentences_max);
      while (budget > 0) {
        const std::size_t m = qi * 3 + uniform_index(text_rng, 3);
        const Month month = ds.month_at(m);
        const int day = uniform_int(text_rng, 1, month.last_day().day);
        const auto t = Timestamp{Date{month.year, month.month, day}.days()} +
                       std::chrono::seconds{uniform_int(text_rng, 6 * 3600, 22 * 3600)};
        const int k = std::min(budget, uniform_int(text_rng, 1, 3));
        budget -= k;
        const bool distressed = ds.distressed[b][m] != 0;

        std::vector<std::string> pieces;
        std::vector<int> ids;
        for (int s = 0; s < k; ++s) {
          const bool use_distress = distressed && uniform01(text_rng) < config.text_signal;
          const int tid = use_distress ? n_tranquil + static_cast<int>(uniform_index(text_rng, n_distress))
                                       : static_cast<int>(uniform_index(text_rng, n_tranquil));
          const auto& tmpl = use_distress ? config.distress_templates[static_cast<std::size_t>(tid - n_tranquil)]
                                          : config.tranquil_templates[static_cast<std::size_t>(tid)];
          pieces.push_back(synth_detail::render(tmpl, config, bank.canonical_name, text_rng));
          ids.push_back(tid);
        }
        std::string body;
        for (const auto& p : pieces) body += (body.empty() ? "" : " ") + p;
        char aid[32];
        std::snprintf(aid, sizeof aid, "%s-%05zu", bank.bank_id.c_str(), seq++);
        ds.articles.push_back({aid, t, std::move(body)});
        ds.sentence_templates.push_back(std::move(ids));
        ds.bank_sentences += static_cast<std::size_t>(k);
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------

struct IndicatorSummary {
  std::string name;
  bool shifted = false;
  double mean_tranquil = 0.0;  // pooled z-score units over bank-months
  double mean_distress = 0.0;
};

struct DatasetSummary {
  std::size_t banks = 0;
  std::size_t articles = 0;
  std::size_t sentences = 0;
  std::size_t events = 0;
  std::size_t bank_months = 0;
  std::size_t distressed_bank_months = 0;
  double prior = 0.0;  // over all bank-months of the span
  std::size_t observed_bank_months = 0;
  std::size_t observed_distressed = 0;
  double observed_prior = 0.0;  // over bank-months with at least one article
  std::vector<IndicatorSummary> indicators;
};

inline DatasetSummary describe(const SyntheticDataset& ds) {
  DatasetSummary s;
  s.banks = ds.registry.size();
  s.articles = ds.articles.size();
  s.sentences = ds.bank_sentences;
  s.events = ds.events.size();
  const std::size_t months = ds.config.n_months();
  s.bank_months = s.banks * months;
  for (const auto& row : ds.distressed)
    s.distressed_bank_months += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
  s.prior = static_cast<double>(s.distressed_bank_months) / static_cast<double>(s.bank_months);

  std::map<std::string, std::size_t> bank_index;
  for (std::size_t b = 0; b < ds.registry.size(); ++b) bank_index[ds.registry[b].bank_id] = b;
  std::set<std::pair<std::size_t, std::size_t>> observed;
  for (const auto& a : ds.articles) {
    const auto bank = a.article_id.substr(0, a.article_id.rfind('-'));
    observed.insert({bank_index.at(bank), ds.month_offset(month_of(date_of(a.published_at)))});
  }
  s.observed_bank_months = observed.size();
  for (const auto& [b, m] : observed) s.observed_distressed += ds.distressed[b][m];
  s.observed_prior = static_cast<double>(s.observed_distressed) / static_cast<double>(std::max<std::size_t>(1, observed.size()));

  // State-conditional indicator means over bank-months, in pooled z-units.
  for (std::size_t j = 0; j < kIndicatorCount; ++j) {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : ds.indicators) {
      sum += r.values[j];
      sq += r.values[j] * r.values[j];
    }
    const double n = static_cast<double>(ds.indicators.size());
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    double sum_d = 0.0, sum_t = 0.0;
    std::size_t n_d = 0, n_t = 0;
    for (const auto& r : ds.indicators) {
      const std::size_t b = bank_index.at(r.bank_id);
      const std::size_t m0 = ds.month_offset(r.quarter.first_month());
      const double z = sd > 0 ? (r.values[j] - mean) / sd : 0.0;
      for (std::size_t m = m0; m < m0 + 3; ++m) {
        if (ds.distressed[b][m]) {
          sum_d += z;
          ++n_d;
        } else {
          sum_t += z;
          ++n_t;
        }
      }
    }
    s.indicators.push_back({std::string(kIndicatorNames[j]), synth_defaults::kShiftSign[j] != 0,
                            n_t ? sum_t / static_cast<double>(n_t) : 0.0, n_d ? sum_d / static_cast<double>(n_d) : 0.0});
  }
  return s;
}

inline nlohmann::json to_json(const DatasetSummary& s) {
  nlohmann::json ind = nlohmann::json::array();
  for (const auto& i : s.indicators)
    ind.push_back({{"name", i.name}, {"shifted", i.shifted}, {"mean_tranquil", i.mean_tranquil},
                   {"mean_distress", i.mean_distress}});
  return {{"banks", s.banks},
          {"articles", s.articles},
          {"sentences", s.sentences},
          {"events", s.events},
          {"bank_months", s.bank_months},
          {"distressed_bank_months", s.distressed_bank_months},
          {"prior", s.prior},
          {"observed_bank_months", s.observed_bank_months},
          {"observed_prior", s.observed_prior},
          {"indicators", ind}};
}

struct SynthPaths {
  std::filesystem::path registry, articles, events, indicators, truth, manifest;

  explicit SynthPaths(const std::filesystem::path& dir)
      : registry(dir / "registry.json"),
        articles(dir / "articles.jsonl"),
        events(dir / "events.csv"),
        indicators(dir / "indicators.csv"),
        truth(dir / "truth.csv"),
        manifest(dir / "manifest.json") {}
};

// Writes the dataset in the ingestion formats plus ground truth and a
// manifest echoing the generating config.
inline void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  const SynthPaths p(dir);
  std::filesystem::create_directories(dir);
  write_registry(p.registry, ds.registry);
  write_articles(p.articles, ds.articles);
  write_events(p.events, ds.events);
  write_indicators(p.indicators, ds.indicators);
  {
    auto out = io::open_out(p.truth);
    out << "bank_id,month,distressed\n";
    for (std::size_t b = 0; b < ds.registry.size(); ++b)
      for (std::size_t m = 0; m < ds.config.n_months(); ++m)
        out << ds.registry[b].bank_id << ',' << to_string(ds.month_at(m)) << ',' << int(ds.distressed[b][m]) << '\n';
    io::finish(out, p.truth);
  }
  const nlohmann::json manifest = {{"generator", "distress-synth"},
                                   {"format_version", 1},
                                   {"seed", ds.config.seed},
                                   {"config", ds.config},
                                   {"summary", to_json(describe(ds))}};
  io::write_text(p.manifest, manifest.dump(2) + "\n");
}

}  // namespace distress
