#pragma once

// News ingestion: bank registry with spelling-variant patterns, rule-based
// sentence splitting, entity filtering and the training vocabulary.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distress/common.hpp"
#include "distress/io.hpp"

namespace distress {

struct BankEntity {
  std::string bank_id;
  std::string canonical_name;
  std::string country;  // ISO-3166 alpha-2
  std::vector<std::string> name_patterns;
  // name_patterns compiled case-insensitively.
  std::vector<std::regex> compiled;

  bool mentioned_in(const std::string& text) const {
    return std::any_of(compiled.begin(), compiled.end(),
                       [&](const std::regex& re) { return std::regex_search(text, re); });
  }
};

struct Article {
  std::string article_id;
  Timestamp published_at{};
  std::string body;
};

struct Sentence {
  std::string sentence_id;
  std::string bank_id;
  Timestamp published_at{};
  std::vector<std::string> tokens;

  bool operator==(const Sentence&) const = default;
};

namespace detail {

inline std::string escape_regex(std::string_view s) {
  static constexpr std::string_view special = R"(\^$.|?*+()[]{}/-)";
  std::string out;
  out.reserve(s.size() * 2);
  for (char c : s) {
    if (special.find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

// nlohmann reports a byte offset; registry errors are reported by line.
inline std::size_t line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

inline bool is_ascii_alpha_upper(char c) { return c >= 'A' && c <= 'Z'; }

}  // namespace detail

inline BankEntity make_bank_entity(std::string bank_id, std::string canonical_name, std::string country,
                                   std::vector<std::string> patterns) {
  if (bank_id.empty()) throw ValidationError("bank_id must be non-empty");
  if (patterns.empty()) throw ValidationError("bank '" + bank_id + "' has no name_patterns");
  BankEntity e{std::move(bank_id), std::move(canonical_name), std::move(country), std::move(patterns), {}};
  constexpr auto flags = std::regex::ECMAScript | std::regex::icase | std::regex::optimize;
  for (const auto& p : e.name_patterns) {
    try {
      e.compiled.emplace_back(p, flags);
    } catch (const std::regex_error& err) {
      throw ValidationError("bank '" + e.bank_id + "': invalid pattern '" + p + "': " + err.what());
    }
  }
  return e;
}

// Parses a registry document: a JSON list of
// {bank_id, canonical_name, country, name_patterns}. Entities keep file order.
inline std::vector<BankEntity> parse_registry(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("registry is not valid JSON: ") + e.what(), detail::line_at(text, e.byte));
  }
  if (!doc.is_array()) throw ParseError("registry must be a JSON list", 1);

  std::vector<BankEntity> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& row = doc[i];
    const auto where = "registry entry " + std::to_string(i);
    if (!row.is_object() || !row.contains("bank_id") || !row.contains("name_patterns") ||
        !row["bank_id"].is_string() || !row["name_patterns"].is_array())
      throw ParseError(where + ": expected {bank_id, canonical_name, country, name_patterns}");
    auto id = row["bank_id"].get<std::string>();
    if (!seen.insert(id).second) throw ValidationError("duplicate bank_id '" + id + "' in registry");
    std::vector<std::string> patterns;
    for (const auto& p : row["name_patterns"]) {
      if (!p.is_string()) throw ParseError(where + ": name_patterns must be strings");
      patterns.push_back(p.get<std::string>());
    }
    out.push_back(make_bank_entity(std::move(id), row.value("canonical_name", std::string{}),
                                   row.value("country", std::string{}), std::move(patterns)));
  }
  return out;
}

inline std::vector<BankEntity> compile_registry(const std::filesystem::path& registry_file) {
  return parse_registry(io::read_text(registry_file));
}

inline nlohmann::json registry_to_json(std::span<const BankEntity> registry) {
  auto doc = nlohmann::json::array();
  for (const auto& e : registry)
    doc.push_back({{"bank_id", e.bank_id},
                   {"canonical_name", e.canonical_name},
                   {"country", e.country},
                   {"name_patterns", e.name_patterns}});
  return doc;
}

inline void write_registry(const std::filesystem::path& path, std::span<const BankEntity> registry) {
  io::write_text(path, registry_to_json(registry).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sentence splitting and tokenization

inline bool is_abbreviation(std::string_view word_with_period) {
  static constexpr std::string_view stop_list[] = {"Inc.", "Ltd.", "St.", "Mr.", "Mrs.", "Ms.", "Dr.", "Co.", "Corp."};
  return std::find(std::begin(stop_list), std::end(stop_list), word_with_period) != std::end(stop_list);
}

// Splits after ". ! ?" when followed by whitespace and an uppercase letter,
// except after a stop-listed abbreviation. Returned sentences are trimmed.
inline std::vector<std::string> split_sentences(std::string_view body) {
  std::vector<std::string> out;
  std::size_t start = 0;
  const std::size_t n = body.size();
  auto emit = [&](std::size_t end) {
    const auto s = io::trim(body.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const char c = body[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= n || !std::isspace(static_cast<unsigned char>(body[i + 1]))) continue;
    std::size_t k = i + 1;
    while (k < n && std::isspace(static_cast<unsigned char>(body[k]))) ++k;
    if (k >= n || !detail::is_ascii_alpha_upper(body[k])) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !std::isspace(static_cast<unsigned char>(body[w - 1]))) --w;
      if (is_abbreviation(body.substr(w, i + 1 - w))) continue;
    }
    emit(i + 1);
    start = k;
    i = k - 1;
  }
  if (start < n) emit(n);
  return out;
}

inline const std::string kNumberToken = "<num>";

// Lowercase, ASCII punctuation removed, every digit run replaced by "<num>".
// Bytes >= 0x80 (UTF-8 continuation) are kept verbatim.
inline std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = sentence.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::string tok;
    while (i < n && !std::isspace(static_cast<unsigned char>(sentence[i]))) {
      const auto c = static_cast<unsigned char>(sentence[i]);
      if (std::isdigit(c)) {
        while (i < n && (std::isdigit(static_cast<unsigned char>(sentence[i])) ||
                         ((sentence[i] == '.' || sentence[i] == ',') && i + 1 < n &&
                          std::isdigit(static_cast<unsigned char>(sentence[i + 1])))))
          ++i;
        tok += kNumberToken;
        continue;
      }
      if (c >= 0x80 || std::isalpha(c)) tok.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
      ++i;
    }
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  return tokens;
}

// One Sentence per (entity-bearing sentence, mentioned bank), in sentence
// order then registry order. sentence_id is "<article_id>:<ordinal>:<bank_id>".
inline std::vector<Sentence> extract_sentences(const Article& article, std::span<const BankEntity> registry) {
  if (registry.empty()) throw ValidationError("extract_sentences: registry is empty");
  std::vector<Sentence> out;
  const auto pieces = split_sentences(article.body);
  for (std::size_t ordinal = 0; ordinal < pieces.size(); ++ordinal) {
    const auto& text = pieces[ordinal];
    std::vector<std::string> tokens;
    bool tokenized = false;
    for (const auto& bank : registry) {
      if (!bank.mentioned_in(text)) continue;
      if (!tokenized) {
        tokens = tokenize(text);
        tokenized = true;
      }
      if (tokens.empty()) break;
      out.push_back({article.article_id + ":" + std::to_string(ordinal) + ":" + bank.bank_id, bank.bank_id,
                     article.published_at, tokens});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

// Additive token counts; shards can be merged before finalizing.
class VocabularyCounter {
 public:
  void add(std::span<const std::string> tokens) {
    for (const auto& t : tokens) ++counts_[t];
    ++sentences_;
  }
  void add(const Sentence& s) { add(s.tokens); }
  void merge(const VocabularyCounter& other) {
    for (const auto& [tok, c] : other.counts_) counts_[tok] += c;
    sentences_ += other.sentences_;
  }
  std::size_t sentences() const { return sentences_; }
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }

 private:
  std::map<std::string, std::uint64_t> counts_;
  std::size_t sentences_ = 0;
};

class Vocabulary {
 public:
  static inline const std::string kUnknown = "<unk>";
  static constexpr std::size_t kUnknownIndex = 0;

  Vocabulary() = default;

  // Index 0 is "<unk>" (its count aggregates dropped occurrences and it has
  // zero noise mass); retained tokens follow by descending count, then token.
  static Vocabulary from_counts(const std::map<std::string, std::uint64_t>& counts, std::uint64_t min_count,
                                double noise_power = 0.75) {
    if (min_count == 0) throw ValidationError("min_count must be positive");
    if (!(noise_power >= 0.0) || !std::isfinite(noise_power)) throw ValidationError("noise power must be >= 0");
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    std::uint64_t dropped = 0;
    for (const auto& [tok, c] : counts) {
      if (tok == kUnknown) {
        dropped += c;
      } else if (c >= min_count) {
        kept.emplace_back(tok, c);
      } else {
        dropped += c;
      }
    }
    if (kept.empty()) throw ValidationError("no token reaches min_count " + std::to_string(min_count));
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocabulary v;
    v.min_count_ = min_count;
    v.noise_power_ = noise_power;
    v.tokens_.push_back(kUnknown);
    v.counts_.push_back(dropped);
    for (auto& [tok, c] : kept) {
      v.tokens_.push_back(tok);
      v.counts_.push_back(c);
    }
    v.rebuild_index();
    v.rebuild_noise();
    return v;
  }

  // Restores a persisted vocabulary verbatim (index order preserved).
  static Vocabulary restore(std::vector<std::string> tokens, std::vector<std::uint64_t> counts,
                            std::uint64_t min_count, double noise_power) {
    if (tokens.empty() || tokens.front() != kUnknown || tokens.size() != counts.size())
      throw ValidationError("malformed vocabulary");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.counts_ = std::move(counts);
    v.min_count_ = min_count;
    v.noise_power_ = noise_power;
    v.rebuild_index();
    v.rebuild_noise();
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::uint64_t count(std::size_t i) const { return counts_.at(i); }
  std::uint64_t min_count() const { return min_count_; }
  double noise_power() const { return noise_power_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::optional<std::size_t> find(const std::string& token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  // Out-of-vocabulary tokens map to "<unk>".
  std::size_t index(const std::string& token) const { return find(token).value_or(kUnknownIndex); }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(index(t));
    return ids;
  }

  std::span<const double> noise() const { return noise_; }

  std::size_t sample_noise(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(noise_cdf_.begin(), noise_cdf_.end(), u);
    const auto i = static_cast<std::size_t>(it - noise_cdf_.begin());
    return std::min(i, noise_cdf_.size() - 1);
  }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  void rebuild_noise() {
    noise_.assign(tokens_.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 1; i < tokens_.size(); ++i) {
      noise_[i] = std::pow(static_cast<double>(counts_[i]), noise_power_);
      total += noise_[i];
    }
    if (!(total > 0.0)) throw ValidationError("vocabulary has no noise mass");
    for (auto& p : noise_) p /= total;
    noise_cdf_.resize(noise_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < noise_.size(); ++i) noise_cdf_[i] = (acc += noise_[i]);
    // Every retained token has positive mass, so the last entry closes the
    // distribution; pin it above 1 so rounding never lets u escape.
    noise_cdf_.back() = 2.0;
  }

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> noise_;
  std::vector<double> noise_cdf_;
  std::uint64_t min_count_ = 1;
  double noise_power_ = 0.75;
};

inline Vocabulary build_vocabulary(std::span<const Sentence> sentences, std::uint64_t min_count = 5,
                                   double noise_power = 0.75) {
  if (sentences.empty()) throw ValidationError("build_vocabulary: empty sentence stream");
  VocabularyCounter counter;
  for (const auto& s : sentences) counter.add(s);
  return Vocabulary::from_counts(counter.counts(), min_count, noise_power);
}

// ---------------------------------------------------------------------------
// JSON-lines formats

inline nlohmann::json to_json(const Article& a) {
  return {{"article_id", a.article_id}, {"published_at", format_timestamp(a.published_at)}, {"body", a.body}};
}

inline nlohmann::json to_json(const Sentence& s) {
  return {{"sentence_id", s.sentence_id},
          {"bank_id", s.bank_id},
          {"published_at", format_timestamp(s.published_at)},
          {"tokens", s.tokens}};
}

namespace detail {

template <class F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  auto in = io::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.filename().string() + ": invalid JSON: " + e.what(), lineno);
    }
    try {
      f(row, lineno);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), lineno);
    }
  }
}

}  // namespace detail

inline std::vector<Article> read_articles(const std::filesystem::path& path) {
  std::vector<Article> out;
  std::unordered_set<std::string> ids;
  detail::for_each_json_line(path, [&](const nlohmann::json& row, std::size_t lineno) {
    Article a{row.at("article_id").get<std::string>(), parse_timestamp(row.at("published_at").get<std::string>()),
              row.at("body").get<std::string>()};
    if (io::trim(a.body).empty()) throw ParseError("article '" + a.article_id + "' has an empty body", lineno);
    if (!ids.insert(a.article_id).second) throw ParseError("duplicate article_id '" + a.article_id + "'", lineno);
    out.push_back(std::move(a));
  });
  return out;
}

inline void write_articles(const std::filesystem::path& path, std::span<const Article> articles) {
  auto out = io::open_out(path);
  for (const auto& a : articles) out << to_json(a).dump() << '\n';
  io::finish(out, path);
}

inline std::vector<Sentence> read_sentences(const std::filesystem::path& path) {
  std::vector<Sentence> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& row, std::size_t lineno) {
    Sentence s{row.at("sentence_id").get<std::string>(), row.at("bank_id").get<std::string>(),
               parse_timestamp(row.at("published_at").get<std::string>()),
               row.at("tokens").get<std::vector<std::string>>()};
    if (s.tokens.empty()) throw ParseError("sentence '" + s.sentence_id + "' has no tokens", lineno);
    out.push_back(std::move(s));
  });
  return out;
}

inline void write_sentences(const std::filesystem::path& path, std::span<const Sentence> sentences) {
  auto out = io::open_out(path);
  for (const auto& s : sentences) out << to_json(s).dump() << '\n';
  io::finish(out, path);
}

}  // namespace distress
