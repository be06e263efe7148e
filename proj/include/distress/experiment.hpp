#pragma once

// Repeated-run protocol: bank-grouped folds resampled per run, training-fold
// normalization, validation snapshotting and threshold choice, test
// usefulness; plus parameter sweeps and report files.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "distress/common.hpp"
#include "distress/eval.hpp"
#include "distress/fusion.hpp"
#include "distress/io.hpp"
#include "distress/neural.hpp"
#include "distress/pvdm.hpp"

namespace distress {

struct ExperimentConfig {
  std::string name = "experiment";
  Arm arm = Arm::combined;
  std::size_t runs = 50;
  std::size_t folds = 5;
  double mu = kDefaultMu;
  MlpConfig mlp;    // input_dim is derived from the arm and the table
  PvdmConfig pvdm;  // echoed in reports; consumed when sweeps rebuild embeddings
  std::uint64_t master_seed = 1;
  std::size_t max_fold_attempts = 50;
  // z-score each semantic dimension with training-fold statistics.
  bool standardize_semantic = true;

  void validate() const {
    if (runs < 1) throw ValidationError("experiment: runs must be >= 1");
    if (folds < 3) throw ValidationError("experiment: folds must be >= 3");
    if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("experiment: mu must lie in (0, 1)");
    if (max_fold_attempts < 1) throw ValidationError("experiment: max_fold_attempts must be >= 1");
    MlpConfig probe = mlp;
    probe.input_dim = 1;
    probe.validate();
    pvdm.validate();
  }

  MlpConfig mlp_for(std::size_t semantic_dim) const {
    MlpConfig c = mlp;
    c.input_dim = arm_input_dim(arm, semantic_dim);
    return c;
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"name", c.name},
       {"arm", to_string(c.arm)},
       {"runs", c.runs},
       {"folds", c.folds},
       {"mu", c.mu},
       {"mlp", c.mlp},
       {"pvdm", c.pvdm},
       {"master_seed", c.master_seed},
       {"max_fold_attempts", c.max_fold_attempts},
       {"standardize_semantic", c.standardize_semantic}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.name = j.value("name", c.name);
  if (j.contains("arm")) c.arm = parse_arm(j["arm"].get<std::string>());
  if (j.contains("runs")) {
    const auto runs = j["runs"].get<long long>();
    if (runs < 1) throw ValidationError("experiment: runs must be >= 1");
    c.runs = static_cast<std::size_t>(runs);
  }
  c.folds = j.value("folds", c.folds);
  c.mu = j.value("mu", c.mu);
  if (j.contains("mlp")) from_json(j["mlp"], c.mlp);
  if (j.contains("pvdm")) from_json(j["pvdm"], c.pvdm);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.max_fold_attempts = j.value("max_fold_attempts", c.max_fold_attempts);
  c.standardize_semantic = j.value("standardize_semantic", c.standardize_semantic);
}

inline ExperimentConfig read_experiment_config(const std::filesystem::path& path) {
  ExperimentConfig c;
  try {
    from_json(nlohmann::json::parse(io::read_text(path)), c);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("experiment config " + path.string() + ": " + e.what());
  }
  return c;
}

// Labels and fold-independent bookkeeping shared by all runs over a table.
struct ExperimentData {
  const FusedTable& table;
  std::vector<DistressEvent> events;
  std::vector<std::string> banks;
  // Month-level classes observed per bank: bit 0 tranquil, bit 1 distressed.
  std::map<std::string, int> bank_classes;

  ExperimentData(const FusedTable& t, std::vector<DistressEvent> ev) : table(t), events(std::move(ev)) {
    if (table.size() == 0) throw ValidationError("experiment: fused table is empty");
    banks = table.bank_ids();
    std::map<std::string, std::vector<DistressEvent>> by_bank;
    for (const auto& e : events) by_bank[e.bank_id].push_back(e);
    std::set<std::pair<std::string, Month>> seen;
    for (const auto& k : table.keys()) {
      if (!seen.insert({k.bank_id, k.month}).second) continue;
      const auto it = by_bank.find(k.bank_id);
      const int y = it == by_bank.end() ? 0 : month_label(k.bank_id, k.month, it->second);
      bank_classes[k.bank_id] |= 1 << y;
    }
  }
};

struct RunResult {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  std::size_t fold_attempt = 0;  // resamples needed for two-class validation and test folds
  FoldAssignment folds;
  std::vector<std::string> train_banks, validation_banks, test_banks;
  NormalizationStats normalization;
  double threshold = 0.5;
  std::size_t best_epoch = 0;
  UsefulnessReport validation;
  UsefulnessReport test;
  std::vector<TrainingCurvePoint> curve;
  MlpModel model;  // best validation snapshot
  std::vector<MonthScore> test_scores;
};

inline std::uint64_t run_seed(std::uint64_t master_seed, std::size_t run_index) {
  return derive_seed(master_seed, 0x72756e /* "run" */, run_index);
}

namespace experiment_detail {

inline bool two_class(const ExperimentData& data, const std::vector<std::string>& banks) {
  int classes = 0;
  for (const auto& b : banks) classes |= data.bank_classes.at(b);
  return classes == 3;
}

struct SemanticScaling {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_std;  // 0 for degenerate dimensions
};

// Population statistics of each semantic dimension over the training columns.
inline SemanticScaling fit_semantic_scaling(const Eigen::MatrixXd& semantic, const std::vector<Eigen::Index>& cols) {
  const auto d = semantic.rows();
  SemanticScaling s{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (auto c : cols) s.mean += semantic.col(c);
  s.mean /= static_cast<double>(cols.size());
  for (auto c : cols) sq += (semantic.col(c) - s.mean).cwiseAbs2();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double sd = std::sqrt(sq(i) / static_cast<double>(cols.size()));
    s.inv_std(i) = sd < NormalizationStats::kDegenerateStd ? 0.0 : 1.0 / sd;
  }
  return s;
}

// Inputs for one split, arm-projected. The numeric-only arm never reads the
// semantic matrix.
inline Eigen::MatrixXd arm_inputs(const FusedTable& table, Arm arm, const std::vector<Eigen::Index>& cols,
                                  const NormalizationStats& norm, const SemanticScaling* scaling) {
  const auto n = static_cast<Eigen::Index>(cols.size());
  const auto sd = static_cast<Eigen::Index>(table.semantic_dim());
  const auto dim = static_cast<Eigen::Index>(arm_input_dim(arm, table.semantic_dim()));
  Eigen::MatrixXd x(dim, n);
  Eigen::Index numeric_row = 0;
  if (arm != Arm::numeric_only) {
    const auto& sem = table.semantic();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = cols[static_cast<std::size_t>(i)];
      if (scaling)
        x.col(i).head(sd) = (sem.col(c) - scaling->mean).cwiseProduct(scaling->inv_std);
      else
        x.col(i).head(sd) = sem.col(c);
    }
    numeric_row = sd;
  }
  if (arm != Arm::text_only) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto z = norm.apply(table.raw_indicators(static_cast<std::size_t>(cols[static_cast<std::size_t>(i)])));
      for (std::size_t j = 0; j < kIndicatorCount; ++j) x(numeric_row + static_cast<Eigen::Index>(j), i) = z[j];
    }
  }
  return x;
}

}  // namespace experiment_detail

// Fold roles, column sets and normalization of one run, before training.
struct RunSplit {
  std::uint64_t seed = 0;
  std::size_t fold_attempt = 0;
  FoldAssignment folds;
  std::vector<std::string> train_banks, validation_banks, test_banks;
  std::vector<Eigen::Index> train_cols, val_cols, test_cols;
  std::vector<int> train_labels;
  NormalizationStats normalization;
};

// Everything random derives from (config.master_seed, run_index).
inline RunSplit split_run(const ExperimentData& data, const ExperimentConfig& config, std::size_t run_index) {
  const auto& table = data.table;
  RunSplit r;
  r.seed = run_seed(config.master_seed, run_index);

  // Resample until validation and test folds each hold both month classes;
  // otherwise the threshold or the test usefulness is undefined.
  bool ok = false;
  for (std::size_t attempt = 0; attempt < config.max_fold_attempts && !ok; ++attempt) {
    r.folds = assign_folds(data.banks, config.folds, derive_seed(r.seed, 0x666f6c64 /* "fold" */, attempt));
    r.fold_attempt = attempt;
    ok = experiment_detail::two_class(data, r.folds.banks_in(r.folds.test_fold)) &&
         experiment_detail::two_class(data, r.folds.banks_in(r.folds.validation_fold));
  }
  if (!ok)
    throw ValidationError("experiment: no fold assignment with both classes in validation and test after " +
                          std::to_string(config.max_fold_attempts) + " attempts");
  r.test_banks = r.folds.banks_in(r.folds.test_fold);
  r.validation_banks = r.folds.banks_in(r.folds.validation_fold);
  for (const auto& [bank, f] : r.folds.fold_of)
    if (r.folds.is_train_fold(f)) r.train_banks.push_back(bank);

  std::vector<IndicatorValues> train_rows;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& k = table.key(i);
    const auto f = r.folds.fold(k.bank_id);
    const auto col = static_cast<Eigen::Index>(i);
    if (f == r.folds.test_fold) {
      r.test_cols.push_back(col);
    } else if (f == r.folds.validation_fold) {
      r.val_cols.push_back(col);
    } else {
      r.train_cols.push_back(col);
      r.train_labels.push_back(k.label);
      train_rows.push_back(table.raw_indicators(i));
    }
  }

  r.normalization = fit_normalization(train_rows, r.folds.train_folds(), r.train_banks);
  // Leakage guard: statistics come from training folds and training banks only.
  for (int f : r.normalization.source_folds)
    if (!r.folds.is_train_fold(static_cast<std::size_t>(f)))
      throw std::logic_error("experiment: normalization fitted on a held-out fold");
  for (const auto& b : r.normalization.source_banks)
    if (!r.folds.is_train_fold(r.folds.fold(b))) throw std::logic_error("experiment: normalization saw held-out bank " + b);
  return r;
}

// One run of the protocol: split, train with validation model selection,
// pick the threshold on validation, score the test fold.
inline RunResult run_once(const ExperimentData& data, const ExperimentConfig& config, std::size_t run_index) {
  config.validate();
  const auto& table = data.table;
  RunSplit split = split_run(data, config, run_index);
  const auto& train_cols = split.train_cols;
  const auto& val_cols = split.val_cols;
  const auto& test_cols = split.test_cols;
  RunResult r;
  r.run_index = run_index;
  r.seed = split.seed;
  r.fold_attempt = split.fold_attempt;
  r.folds = split.folds;
  r.train_banks = split.train_banks;
  r.validation_banks = split.validation_banks;
  r.test_banks = split.test_banks;
  r.normalization = split.normalization;

  std::optional<experiment_detail::SemanticScaling> scaling;
  if (config.standardize_semantic && config.arm != Arm::numeric_only)
    scaling = experiment_detail::fit_semantic_scaling(table.semantic(), train_cols);
  const auto* sc = scaling ? &*scaling : nullptr;
  const auto x_train = experiment_detail::arm_inputs(table, config.arm, train_cols, r.normalization, sc);
  const auto x_val = experiment_detail::arm_inputs(table, config.arm, val_cols, r.normalization, sc);
  const auto x_test = experiment_detail::arm_inputs(table, config.arm, test_cols, r.normalization, sc);
  auto keys_of = [&](const std::vector<Eigen::Index>& cols) {
    std::vector<SampleKey> keys;
    keys.reserve(cols.size());
    for (auto c : cols) keys.push_back(table.key(static_cast<std::size_t>(c)));
    return keys;
  };
  const auto val_keys = keys_of(val_cols);
  const auto test_keys = keys_of(test_cols);

  auto month_scores = [&](const MlpModel& m, const Eigen::MatrixXd& x, const std::vector<SampleKey>& keys) {
    return aggregate_monthly(predict(m, x, keys), data.events);
  };
  const double mu = config.mu;
  const EvalHook hook = [&](const MlpModel& m) {
    const auto scores = month_scores(m, x_val, val_keys);
    return usefulness_report(scores, pick_threshold(scores, mu), mu).relative_usefulness;
  };

  MlpConfig mlp = config.mlp_for(table.semantic_dim());
  mlp.seed = derive_seed(r.seed, 0x6d6c70 /* "mlp" */);
  const auto trained = train(MlpModel::init(mlp), x_train, split.train_labels, hook);
  r.best_epoch = trained.best_epoch;
  r.curve = trained.curve;

  const auto val_scores = month_scores(trained.best, x_val, val_keys);
  r.threshold = pick_threshold(val_scores, mu);
  r.validation = usefulness_report(val_scores, r.threshold, mu);
  r.test_scores = month_scores(trained.best, x_test, test_keys);
  r.test = usefulness_report(r.test_scores, r.threshold, mu);
  r.model = trained.best;
  return r;
}

struct RepeatedResult {
  ExperimentConfig config;
  double mean = 0.0;  // of test U_r
  double std = 0.0;   // sample standard deviation; 0 for a single run
  std::vector<RunResult> runs;
};

inline std::pair<double, double> mean_and_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

// Runs 0..runs-1, optionally on `jobs` worker threads. Results are keyed by
// run index, so the outcome does not depend on scheduling.
inline RepeatedResult run_repeated(const ExperimentData& data, const ExperimentConfig& config, std::size_t jobs = 1) {
  config.validate();
  RepeatedResult out;
  out.config = config;
  out.runs.resize(config.runs);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < config.runs;) {
      try {
        out.runs[i] = run_once(data, config, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(config.runs);
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, config.runs));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<double> ur;
  for (const auto& r : out.runs) ur.push_back(r.test.relative_usefulness);
  std::tie(out.mean, out.std) = mean_and_std(ur);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names = {"hidden_width", "hidden_layer_count", "lr", "l1",
                                                 "dropout_p",    "window_n",           "vector_dim"};
  return names;
}

inline bool sweep_needs_embedding(const std::string& parameter) {
  return parameter == "window_n" || parameter == "vector_dim";
}

struct SweepPoint {
  double value = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t runs = 0;
};

struct SweepResult {
  std::string parameter;
  std::vector<double> grid;
  std::vector<SweepPoint> points;  // one per grid value, in grid order
  std::vector<RepeatedResult> details;
};

// Applies a grid value to a copy of `base`.
inline ExperimentConfig with_parameter(ExperimentConfig base, const std::string& parameter, double value) {
  auto as_count = [&](const char* what) {
    if (!(value >= 1.0) || value != std::floor(value))
      throw ValidationError(std::string("sweep: ") + what + " must be a positive integer");
    return static_cast<std::size_t>(value);
  };
  const std::size_t width = base.mlp.hidden_layers.empty() ? 50 : base.mlp.hidden_layers.front();
  if (parameter == "hidden_width") {
    const auto w = as_count("hidden_width");
    if (base.mlp.hidden_layers.empty()) base.mlp.hidden_layers = {w};
    for (auto& h : base.mlp.hidden_layers) h = w;
  } else if (parameter == "hidden_layer_count") {
    base.mlp.hidden_layers.assign(as_count("hidden_layer_count"), width);
  } else if (parameter == "lr") {
    base.mlp.lr = value;
  } else if (parameter == "l1") {
    base.mlp.l1 = value;
  } else if (parameter == "dropout_p") {
    base.mlp.dropout_p = value;
  } else if (parameter == "window_n") {
    base.pvdm.window_n = as_count("window_n");
  } else if (parameter == "vector_dim") {
    base.pvdm.vector_dim = as_count("vector_dim");
  } else {
    throw ValidationError("sweep: unknown parameter '" + parameter + "'");
  }
  base.validate();
  return base;
}

// Builds a fused table for a given embedding config; needed when the swept
// parameter changes the embedding.
using TableBuilder = std::function<FusedTable(const PvdmConfig&)>;

inline SweepResult sweep(const ExperimentData& data, const ExperimentConfig& base, const std::string& parameter,
                         const std::vector<double>& grid, std::size_t jobs = 1, const TableBuilder& rebuild = {}) {
  if (std::find(sweep_parameters().begin(), sweep_parameters().end(), parameter) == sweep_parameters().end())
    throw ValidationError("sweep: unknown parameter '" + parameter + "'");
  if (grid.empty()) throw ValidationError("sweep: grid must be non-empty");
  if (sweep_needs_embedding(parameter) && !rebuild)
    throw ValidationError("sweep: " + parameter + " needs the sentence corpus to retrain embeddings");
  SweepResult out;
  out.parameter = parameter;
  out.grid = grid;
  for (double value : grid) {
    const auto cfg = with_parameter(base, parameter, value);
    RepeatedResult rep;
    if (sweep_needs_embedding(parameter)) {
      const FusedTable table = rebuild(cfg.pvdm);
      const ExperimentData rebuilt(table, data.events);
      rep = run_repeated(rebuilt, cfg, jobs);
    } else {
      rep = run_repeated(data, cfg, jobs);
    }
    out.points.push_back({value, rep.mean, rep.std, rep.runs.size()});
    out.details.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports. Output depends only on the results, so equal seeds give
// byte-identical files.

inline nlohmann::json run_to_json(const RunResult& r) {
  return {{"run", r.run_index},
          {"seed", r.seed},
          {"fold_attempt", r.fold_attempt},
          {"train_banks", r.train_banks},
          {"validation_banks", r.validation_banks},
          {"test_banks", r.test_banks},
          {"threshold", r.threshold},
          {"best_epoch", r.best_epoch},
          {"validation", to_json(r.validation)},
          {"test", to_json(r.test)}};
}

inline nlohmann::json summary_json(const RepeatedResult& rep) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rep.runs) runs.push_back(run_to_json(r));
  return {{"config", rep.config},
          {"arm", to_string(rep.config.arm)},
          {"runs", rep.runs.size()},
          {"mean_U_r", rep.mean},
          {"std_U_r", rep.std},
          {"per_run", runs}};
}

inline void write_runs_csv(std::ostream& out, std::span<const RepeatedResult> results) {
  for (const auto& rep : results)
    for (const auto& r : rep.runs) {
      const auto& t = r.test;
      out << to_string(rep.config.arm) << ',' << r.run_index << ',' << r.seed << ',' << r.fold_attempt << ','
          << io::format_double(r.threshold) << ',' << r.best_epoch << ','
          << io::format_double(r.validation.relative_usefulness) << ',' << io::format_double(t.relative_usefulness)
          << ',' << io::format_double(t.absolute_usefulness) << ',' << io::format_double(t.baseline_loss) << ','
          << io::format_double(t.model_loss) << ',' << io::format_double(t.prior) << ',' << t.confusion.total() << '\n';
    }
}

inline constexpr const char* kRunsHeader =
    "arm,run,seed,fold_attempt,threshold,best_epoch,val_U_r,test_U_r,test_U_a,test_L_b,test_L_m,test_prior,"
    "test_bank_months\n";

// results/<name>/{runs.csv, summary.json, arms.csv}; arms.csv holds one
// summary row per arm.
inline void emit_report(std::span<const RepeatedResult> results, const std::filesystem::path& dir) {
  if (results.empty()) throw ValidationError("emit_report: no results");
  std::filesystem::create_directories(dir);
  {
    const auto path = dir / "runs.csv";
    auto out = io::open_out(path);
    out << kRunsHeader;
    write_runs_csv(out, results);
    io::finish(out, path);
  }
  {
    const auto path = dir / "arms.csv";
    auto out = io::open_out(path);
    out << "arm,runs,mean_U_r,std_U_r\n";
    for (const auto& rep : results)
      out << to_string(rep.config.arm) << ',' << rep.runs.size() << ',' << io::format_double(rep.mean) << ','
          << io::format_double(rep.std) << '\n';
    io::finish(out, path);
  }
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& rep : results) arms.push_back(summary_json(rep));
  io::write_text(dir / "summary.json", nlohmann::json{{"experiments", arms}}.dump(2) + "\n");
}

inline void write_sweep_csv(const SweepResult& s, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << s.parameter << ",runs,mean_U_r,std_U_r\n";
  for (const auto& p : s.points)
    out << io::format_double(p.value) << ',' << p.runs << ',' << io::format_double(p.mean) << ','
        << io::format_double(p.std) << '\n';
  io::finish(out, path);
}

// results/<name>/{sweep_<param>.csv, runs.csv, summary.json}.
inline void emit_sweep_report(const SweepResult& s, const std::filesystem::path& dir) {
  if (s.points.empty()) throw ValidationError("emit_sweep_report: no grid points");
  std::filesystem::create_directories(dir);
  write_sweep_csv(s, dir / ("sweep_" + s.parameter + ".csv"));
  {
    const auto path = dir / "runs.csv";
    auto out = io::open_out(path);
    out << s.parameter << ',' << kRunsHeader;
    for (std::size_t i = 0; i < s.details.size(); ++i) {
      std::ostringstream rows;
      write_runs_csv(rows, std::span(&s.details[i], 1));
      std::istringstream lines(rows.str());
      for (std::string line; std::getline(lines, line);) out << io::format_double(s.points[i].value) << ',' << line << '\n';
    }
    io::finish(out, path);
  }
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& r : s.details[i].runs) seeds.push_back(r.seed);
    points.push_back({{"value", s.points[i].value},
                      {"runs", s.points[i].runs},
                      {"mean_U_r", s.points[i].mean},
                      {"std_U_r", s.points[i].std},
                      {"config", s.details[i].config},
                      {"seeds", seeds}});
  }
  io::write_text(dir / "summary.json",
                 nlohmann::json{{"parameter", s.parameter}, {"grid", s.grid}, {"points", points}}.dump(2) + "\n");
}

}  // namespace distress
