#pragma once

// Text/numeric integration: quarter alignment of sentences with bank
// indicators, distress labels, z-score normalization, 612-wide fused inputs
// and bank-grouped folds.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "distress/common.hpp"
#include "distress/corpus.hpp"
#include "distress/io.hpp"
#include "distress/pvdm.hpp"

namespace distress {

inline constexpr std::size_t kIndicatorCount = 12;
inline constexpr std::size_t kDefaultSemanticDim = 600;

inline constexpr std::array<std::string_view, kIndicatorCount> kIndicatorNames = {
    "capital_to_asset",
    "interest_to_liabilities",
    "reserves_to_asset",
    "mortgages_to_loans_d4",
    "securities_to_liabilities_d4",
    "financial_assets_to_gdp",
    "house_price_gap",
    "mip_international_investment_position",
    "private_debt",
    "government_bond_yield_d4",
    "credit_to_gdp",
    "credit_to_gdp_d12",
};

using IndicatorValues = std::array<double, kIndicatorCount>;

struct QuarterlyIndicators {
  std::string bank_id;
  Quarter quarter;
  IndicatorValues values{};
};

enum class EventKind { bankruptcy_default, state_aid, distressed_merger };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::bankruptcy_default: return "bankruptcy_default";
    case EventKind::state_aid: return "state_aid";
    case EventKind::distressed_merger: return "distressed_merger";
  }
  return "unknown";
}

inline EventKind parse_event_kind(std::string_view s) {
  if (s == "bankruptcy_default") return EventKind::bankruptcy_default;
  if (s == "state_aid") return EventKind::state_aid;
  if (s == "distressed_merger") return EventKind::distressed_merger;
  throw ValidationError("unknown event kind '" + std::string(s) + "'");
}

struct DistressEvent {
  std::string bank_id;
  Date start_date;
  Date end_date;
  EventKind kind = EventKind::state_aid;

  bool covers(const Date& d) const { return start_date <= d && d <= end_date; }
  bool intersects(const Date& first, const Date& last) const { return start_date <= last && first <= end_date; }
};

enum class Arm { text_only, numeric_only, combined };

inline std::string_view to_string(Arm a) {
  switch (a) {
    case Arm::text_only: return "text_only";
    case Arm::numeric_only: return "numeric_only";
    case Arm::combined: return "combined";
  }
  return "unknown";
}

inline Arm parse_arm(std::string_view s) {
  if (s == "text_only") return Arm::text_only;
  if (s == "numeric_only") return Arm::numeric_only;
  if (s == "combined") return Arm::combined;
  throw ValidationError("unknown arm '" + std::string(s) + "' (text_only|numeric_only|combined)");
}

inline std::size_t arm_input_dim(Arm arm, std::size_t semantic_dim = kDefaultSemanticDim) {
  switch (arm) {
    case Arm::text_only: return semantic_dim;
    case Arm::numeric_only: return kIndicatorCount;
    case Arm::combined: return semantic_dim + kIndicatorCount;
  }
  return 0;
}

struct FusedSample {
  std::string sentence_id;
  std::string bank_id;
  Month month;
  std::vector<double> input;  // semantic values, then indicators
  int label = 0;
};

// ---------------------------------------------------------------------------
// Alignment

struct AlignedSentence {
  std::size_t sentence;  // index into the aligned sentence span
  Quarter quarter;
  IndicatorValues indicators{};
};

struct AlignReport {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::vector<std::string> banks_without_sentences;  // sorted
};

struct AlignResult {
  std::vector<AlignedSentence> aligned;
  AlignReport report;
};

// Matches every sentence to its bank's indicators for the calendar quarter
// of its UTC publication date. Unmatched sentences are dropped and counted.
inline AlignResult align(std::span<const Sentence> sentences, std::span<const QuarterlyIndicators> indicators) {
  std::map<std::pair<std::string, int>, const QuarterlyIndicators*> by_key;
  std::set<std::string> banks;
  for (const auto& row : indicators) {
    by_key[{row.bank_id, row.quarter.index()}] = &row;
    banks.insert(row.bank_id);
  }
  AlignResult out;
  std::set<std::string> surviving;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    banks.insert(s.bank_id);
    const Quarter q = quarter_of(date_of(s.published_at));
    const auto it = by_key.find({s.bank_id, q.index()});
    if (it == by_key.end()) {
      ++out.report.dropped;
      continue;
    }
    out.aligned.push_back({i, q, it->second->values});
    surviving.insert(s.bank_id);
  }
  out.report.kept = out.aligned.size();
  for (const auto& b : banks)
    if (!surviving.contains(b)) out.report.banks_without_sentences.push_back(b);
  return out;
}

// ---------------------------------------------------------------------------
// Labels

inline int label(const Sentence& sentence, std::span<const DistressEvent> events) {
  const Date d = date_of(sentence.published_at);
  for (const auto& e : events)
    if (e.bank_id == sentence.bank_id && e.covers(d)) return 1;
  return 0;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationStats {
  IndicatorValues mean{};
  IndicatorValues std{};
  std::array<bool, kIndicatorCount> degenerate{};
  std::vector<int> source_folds;         // fold ids the fit was restricted to
  std::vector<std::string> source_banks;  // banks that contributed samples (sorted)
  std::size_t samples = 0;

  static constexpr double kDegenerateStd = 1e-12;

  IndicatorValues apply(const IndicatorValues& raw) const {
    IndicatorValues z{};
    for (std::size_t j = 0; j < kIndicatorCount; ++j) z[j] = degenerate[j] ? 0.0 : (raw[j] - mean[j]) / std[j];
    return z;
  }
};

// Population (divisor N) statistics over the given rows.
inline NormalizationStats fit_normalization(std::span<const IndicatorValues> rows, std::vector<int> source_folds = {},
                                            std::vector<std::string> source_banks = {}) {
  if (rows.size() < 2) throw ValidationError("fit_normalization: need at least 2 samples");
  NormalizationStats st;
  st.samples = rows.size();
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < kIndicatorCount; ++j) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[j] - mean) * (r[j] - mean);
    st.mean[j] = mean;
    st.std[j] = std::sqrt(ss / n);
    st.degenerate[j] = st.std[j] < NormalizationStats::kDegenerateStd;
  }
  std::sort(source_folds.begin(), source_folds.end());
  std::sort(source_banks.begin(), source_banks.end());
  source_banks.erase(std::unique(source_banks.begin(), source_banks.end()), source_banks.end());
  st.source_folds = std::move(source_folds);
  st.source_banks = std::move(source_banks);
  return st;
}

inline nlohmann::json to_json(const NormalizationStats& st) {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t j = 0; j < kIndicatorCount; ++j)
    cols.push_back({{"name", kIndicatorNames[j]}, {"mean", st.mean[j]}, {"std", st.std[j]},
                    {"degenerate", st.degenerate[j]}});
  return {{"indicators", cols},
          {"samples", st.samples},
          {"source_folds", st.source_folds},
          {"source_banks", st.source_banks},
          {"population_std", true}};
}

// ---------------------------------------------------------------------------
// Fusion and arm projection

inline FusedSample fuse(const Sentence& sentence, std::span<const double> semantic, std::span<const double> numeric,
                        int label_value, std::size_t semantic_dim = kDefaultSemanticDim) {
  if (semantic.size() != semantic_dim || numeric.size() != kIndicatorCount)
    throw ValidationError("fuse: expected " + std::to_string(semantic_dim) + "+" + std::to_string(kIndicatorCount) +
                          " inputs, got " + std::to_string(semantic.size()) + "+" + std::to_string(numeric.size()));
  if (label_value != 0 && label_value != 1) throw ValidationError("fuse: label must be 0 or 1");
  FusedSample f{sentence.sentence_id, sentence.bank_id, month_of(date_of(sentence.published_at)), {}, label_value};
  f.input.reserve(semantic.size() + numeric.size());
  f.input.insert(f.input.end(), semantic.begin(), semantic.end());
  f.input.insert(f.input.end(), numeric.begin(), numeric.end());
  return f;
}

inline std::vector<double> project_arm(const FusedSample& sample, Arm arm) {
  if (sample.input.size() < kIndicatorCount) throw ValidationError("project_arm: malformed sample");
  const auto semantic_end = sample.input.end() - static_cast<std::ptrdiff_t>(kIndicatorCount);
  switch (arm) {
    case Arm::text_only: return {sample.input.begin(), semantic_end};
    case Arm::numeric_only: return {semantic_end, sample.input.end()};
    case Arm::combined: return sample.input;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
  std::size_t k = 5;
  std::map<std::string, std::size_t> fold_of;
  std::size_t test_fold = 0;
  std::size_t validation_fold = 1;

  bool is_train_fold(std::size_t f) const { return f != test_fold && f != validation_fold; }
  std::vector<int> train_folds() const {
    std::vector<int> out;
    for (std::size_t f = 0; f < k; ++f)
      if (is_train_fold(f)) out.push_back(static_cast<int>(f));
    return out;
  }
  std::vector<std::string> banks_in(std::size_t fold) const {
    std::vector<std::string> out;
    for (const auto& [bank, f] : fold_of)
      if (f == fold) out.push_back(bank);
    return out;
  }
  std::size_t fold(const std::string& bank_id) const {
    const auto it = fold_of.find(bank_id);
    if (it == fold_of.end()) throw LookupError("bank '" + bank_id + "' has no fold");
    return it->second;
  }
};

// Seeded shuffle of the (sorted, de-duplicated) banks dealt round-robin into
// k folds. Fold 0 is the test fold, fold 1 validation, the rest training.
inline FoldAssignment assign_folds(std::vector<std::string> bank_ids, std::size_t k, std::uint64_t seed) {
  std::sort(bank_ids.begin(), bank_ids.end());
  bank_ids.erase(std::unique(bank_ids.begin(), bank_ids.end()), bank_ids.end());
  if (k < 3) throw ValidationError("assign_folds: need k >= 3 for train/validation/test roles");
  if (bank_ids.size() < k)
    throw ValidationError("assign_folds: " + std::to_string(bank_ids.size()) + " banks cannot fill " +
                          std::to_string(k) + " folds");
  Rng rng{seed};
  shuffle(bank_ids, rng);
  FoldAssignment fa;
  fa.k = k;
  for (std::size_t i = 0; i < bank_ids.size(); ++i) fa.fold_of[bank_ids[i]] = i % k;
  return fa;
}

// ---------------------------------------------------------------------------
// Fused table: the column-major form used by experiments. Indicators are
// kept raw; each run normalizes them with its own training-fold statistics.

struct SampleKey {
  std::string sentence_id;
  std::string bank_id;
  Month month;
  int label = 0;
};

class FusedTable {
 public:
  FusedTable() = default;
  FusedTable(std::size_t semantic_dim, std::vector<SampleKey> keys, Eigen::MatrixXd semantic, Eigen::MatrixXd numeric)
      : semantic_dim_(semantic_dim), keys_(std::move(keys)), semantic_(std::move(semantic)), numeric_(std::move(numeric)) {
    if (static_cast<std::size_t>(semantic_.rows()) != semantic_dim_ ||
        static_cast<std::size_t>(semantic_.cols()) != keys_.size() ||
        static_cast<std::size_t>(numeric_.rows()) != kIndicatorCount ||
        static_cast<std::size_t>(numeric_.cols()) != keys_.size())
      throw ValidationError("FusedTable: matrix shapes do not match keys");
  }
  FusedTable(const FusedTable& o)
      : semantic_dim_(o.semantic_dim_), keys_(o.keys_), semantic_(o.semantic_), numeric_(o.numeric_) {}
  FusedTable& operator=(const FusedTable& o) {
    if (this != &o) {
      semantic_dim_ = o.semantic_dim_;
      keys_ = o.keys_;
      semantic_ = o.semantic_;
      numeric_ = o.numeric_;
    }
    return *this;
  }
  FusedTable(FusedTable&&) = default;
  FusedTable& operator=(FusedTable&&) = default;

  std::size_t size() const { return keys_.size(); }
  std::size_t semantic_dim() const { return semantic_dim_; }
  const std::vector<SampleKey>& keys() const { return keys_; }
  const SampleKey& key(std::size_t i) const { return keys_.at(i); }

  // Semantic access is counted so that arm isolation can be audited.
  const Eigen::MatrixXd& semantic() const {
    semantic_reads_.fetch_add(1, std::memory_order_relaxed);
    return semantic_;
  }
  Eigen::MatrixXd& mutable_semantic() { return semantic_; }
  const Eigen::MatrixXd& numeric() const { return numeric_; }
  std::size_t semantic_reads() const { return semantic_reads_.load(); }
  void reset_semantic_reads() const { semantic_reads_.store(0); }

  std::vector<std::string> bank_ids() const {
    std::set<std::string> s;
    for (const auto& k : keys_) s.insert(k.bank_id);
    return {s.begin(), s.end()};
  }

  IndicatorValues raw_indicators(std::size_t i) const {
    IndicatorValues v{};
    for (std::size_t j = 0; j < kIndicatorCount; ++j) v[j] = numeric_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    return v;
  }

  FusedSample sample(std::size_t i) const {
    const auto& k = keys_.at(i);
    FusedSample f{k.sentence_id, k.bank_id, k.month, {}, k.label};
    f.input.resize(semantic_dim_ + kIndicatorCount);
    const auto col = static_cast<Eigen::Index>(i);
    for (std::size_t d = 0; d < semantic_dim_; ++d) f.input[d] = semantic_(static_cast<Eigen::Index>(d), col);
    for (std::size_t j = 0; j < kIndicatorCount; ++j)
      f.input[semantic_dim_ + j] = numeric_(static_cast<Eigen::Index>(j), col);
    return f;
  }

 private:
  std::size_t semantic_dim_ = 0;
  std::vector<SampleKey> keys_;
  Eigen::MatrixXd semantic_;  // semantic_dim x N
  Eigen::MatrixXd numeric_;   // 12 x N, raw
  mutable std::atomic<std::size_t> semantic_reads_{0};
};

// Builds the table from aligned sentences. `semantic_of` returns the
// paragraph vector for a sentence id.
template <class SemanticLookup>
FusedTable build_table(std::span<const Sentence> sentences, std::span<const AlignedSentence> aligned,
                       std::span<const DistressEvent> events, std::size_t semantic_dim, SemanticLookup&& semantic_of) {
  std::map<std::string, std::vector<DistressEvent>> by_bank;
  for (const auto& e : events) by_bank[e.bank_id].push_back(e);
  std::vector<SampleKey> keys;
  keys.reserve(aligned.size());
  Eigen::MatrixXd semantic(static_cast<Eigen::Index>(semantic_dim), static_cast<Eigen::Index>(aligned.size()));
  Eigen::MatrixXd numeric(static_cast<Eigen::Index>(kIndicatorCount), static_cast<Eigen::Index>(aligned.size()));
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const auto& a = aligned[i];
    const auto& s = sentences[a.sentence];
    const auto it = by_bank.find(s.bank_id);
    const int y = it == by_bank.end() ? 0 : label(s, it->second);
    std::span<const double> vec = semantic_of(s.sentence_id);
    const auto fused = fuse(s, vec, a.indicators, y, semantic_dim);
    const auto col = static_cast<Eigen::Index>(i);
    for (std::size_t d = 0; d < semantic_dim; ++d) semantic(static_cast<Eigen::Index>(d), col) = fused.input[d];
    for (std::size_t j = 0; j < kIndicatorCount; ++j)
      numeric(static_cast<Eigen::Index>(j), col) = fused.input[semantic_dim + j];
    keys.push_back({fused.sentence_id, fused.bank_id, fused.month, fused.label});
  }
  return FusedTable(semantic_dim, std::move(keys), std::move(semantic), std::move(numeric));
}

inline FusedTable build_table(std::span<const Sentence> sentences, std::span<const AlignedSentence> aligned,
                              std::span<const DistressEvent> events, const PvdmModel& model) {
  return build_table(sentences, aligned, events, model.dim(),
                     [&](const std::string& id) { return model.paragraph(model.row_of(id)); });
}

// ---------------------------------------------------------------------------
// File formats

inline std::vector<QuarterlyIndicators> read_indicators(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<QuarterlyIndicators> out;
  std::set<std::pair<std::string, int>> seen;
  if (!std::getline(in, line)) throw ParseError("indicators file is empty", 1);
  ++lineno;
  const auto header = io::split_csv(line);
  if (header.size() != 2 + kIndicatorCount || header[0] != "bank_id" || header[1] != "quarter")
    throw ParseError("indicators header must be bank_id,quarter,<12 indicator columns>", lineno);
  for (std::size_t j = 0; j < kIndicatorCount; ++j)
    if (header[2 + j] != kIndicatorNames[j])
      throw ParseError("indicator column " + std::to_string(j) + " must be '" + std::string(kIndicatorNames[j]) + "'",
                       lineno);
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_csv(line);
    if (f.size() != 2 + kIndicatorCount) throw ParseError("expected 14 fields", lineno);
    QuarterlyIndicators row;
    row.bank_id = f[0];
    try {
      row.quarter = parse_quarter(f[1]);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
    for (std::size_t j = 0; j < kIndicatorCount; ++j) {
      row.values[j] = io::parse_double(f[2 + j], lineno);
      if (!std::isfinite(row.values[j])) throw ParseError("non-finite indicator value", lineno);
    }
    if (!seen.insert({row.bank_id, row.quarter.index()}).second)
      throw ParseError("duplicate indicator row for " + row.bank_id + " " + to_string(row.quarter), lineno);
    out.push_back(std::move(row));
  }
  return out;
}

inline void write_indicators(const std::filesystem::path& path, std::span<const QuarterlyIndicators> rows) {
  auto out = io::open_out(path);
  out << "bank_id,quarter";
  for (auto name : kIndicatorNames) out << ',' << name;
  out << '\n';
  for (const auto& r : rows) {
    out << r.bank_id << ',' << to_string(r.quarter);
    for (double v : r.values) out << ',' << io::format_double(v);
    out << '\n';
  }
  io::finish(out, path);
}

inline std::vector<DistressEvent> read_events(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<DistressEvent> out;
  if (!std::getline(in, line)) throw ParseError("events file is empty", 1);
  ++lineno;
  if (io::split_csv(line) != std::vector<std::string>{"bank_id", "start_date", "end_date", "kind"})
    throw ParseError("events header must be bank_id,start_date,end_date,kind", lineno);
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_csv(line);
    if (f.size() != 4) throw ParseError("expected 4 fields", lineno);
    try {
      DistressEvent e{f[0], parse_date(f[1]), parse_date(f[2]), parse_event_kind(f[3])};
      if (e.end_date < e.start_date) throw ValidationError("event ends before it starts");
      out.push_back(std::move(e));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

inline void write_events(const std::filesystem::path& path, std::span<const DistressEvent> events) {
  auto out = io::open_out(path);
  out << "bank_id,start_date,end_date,kind\n";
  for (const auto& e : events)
    out << e.bank_id << ',' << to_string(e.start_date) << ',' << to_string(e.end_date) << ',' << to_string(e.kind)
        << '\n';
  io::finish(out, path);
}

// "DFUS" container, version 1: header, then one record per sample with the
// raw 12 indicators after the semantic values.
inline constexpr std::uint32_t kFusedFormatVersion = 1;

inline void write_fused_table(const std::filesystem::path& path, const FusedTable& t) {
  auto out = io::open_out(path, true);
  io::put_header(out, "DFUS", kFusedFormatVersion);
  io::put<std::uint64_t>(out, t.semantic_dim());
  io::put<std::uint64_t>(out, kIndicatorCount);
  io::put<std::uint64_t>(out, t.size());
  const auto& sem = t.semantic();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& k = t.key(i);
    io::put_string(out, k.sentence_id);
    io::put_string(out, k.bank_id);
    io::put<std::int32_t>(out, k.month.year);
    io::put<std::int32_t>(out, k.month.month);
    io::put<std::int32_t>(out, k.label);
    const auto col = static_cast<Eigen::Index>(i);
    io::put_doubles(out, sem.col(col).data(), t.semantic_dim());
    io::put_doubles(out, t.numeric().col(col).data(), kIndicatorCount);
  }
  io::finish(out, path);
}

inline FusedTable read_fused_table(const std::filesystem::path& path) {
  auto in = io::open_in(path, true);
  io::expect_header(in, "DFUS", kFusedFormatVersion);
  const auto dim = io::get<std::uint64_t>(in);
  if (io::get<std::uint64_t>(in) != kIndicatorCount) throw ParseError("fused table: unexpected indicator count");
  const auto n = io::get<std::uint64_t>(in);
  std::vector<SampleKey> keys(n);
  Eigen::MatrixXd semantic(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd numeric(static_cast<Eigen::Index>(kIndicatorCount), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto& k = keys[i];
    k.sentence_id = io::get_string(in);
    k.bank_id = io::get_string(in);
    k.month.year = io::get<std::int32_t>(in);
    k.month.month = io::get<std::int32_t>(in);
    k.label = io::get<std::int32_t>(in);
    const auto col = static_cast<Eigen::Index>(i);
    io::get_doubles(in, semantic.col(col).data(), dim);
    io::get_doubles(in, numeric.col(col).data(), kIndicatorCount);
  }
  return FusedTable(dim, std::move(keys), std::move(semantic), std::move(numeric));
}

inline nlohmann::json to_json(const FusedSample& f) {
  return {{"sentence_id", f.sentence_id}, {"bank_id", f.bank_id}, {"month", to_string(f.month)},
          {"label", f.label},             {"input", f.input}};
}

inline void write_fused_jsonl(const std::filesystem::path& path, const FusedTable& t) {
  auto out = io::open_out(path);
  for (std::size_t i = 0; i < t.size(); ++i) out << to_json(t.sample(i)).dump() << '\n';
  io::finish(out, path);
}

}  // namespace distress
