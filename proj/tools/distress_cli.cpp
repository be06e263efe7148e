// Command-line entry point: one pipeline stage or experiment per process.
// Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distress/distress.hpp"

namespace fs = std::filesystem;
using namespace distress;

namespace {

// Default file names inside a --data directory.
struct DataLayout {
  fs::path dir;
  fs::path registry() const { return dir / "registry.json"; }
  fs::path articles() const { return dir / "articles.jsonl"; }
  fs::path sentences() const { return dir / "sentences.jsonl"; }
  fs::path model() const { return dir / "model.bin"; }
  fs::path indicators() const { return dir / "indicators.csv"; }
  fs::path events() const { return dir / "events.csv"; }
  fs::path fused() const { return dir / "fused.bin"; }
};

fs::path pick(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

void log(const std::string& msg) { std::cerr << msg << '\n'; }

// Flags shared by train/experiment/sweep.
struct RunFlags {
  std::string data = "data";
  std::string fused, events, config, out = "results", name;
  std::optional<std::uint64_t> seed;
  std::optional<double> mu;
  std::optional<long long> runs;
  std::optional<std::size_t> epochs;
  std::size_t jobs = 1;

  void attach(CLI::App* app, bool with_runs) {
    app->add_option("--data", data, "Directory holding pipeline files")->capture_default_str();
    app->add_option("--fused", fused, "Fused dataset (default <data>/fused.bin)");
    app->add_option("--events", events, "Events CSV (default <data>/events.csv)");
    app->add_option("--config", config, "Experiment config JSON");
    app->add_option("--out", out, "Results root directory")->capture_default_str();
    app->add_option("--name", name, "Experiment name (results/<name>/)");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--mu", mu, "Error preference mu (default 0.9)");
    app->add_option("--epochs", epochs, "Classifier epochs (default 100)");
    if (with_runs) {
      app->add_option("--runs", runs, "Repeated runs");
      app->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    }
  }

  ExperimentConfig config_with(const std::string& default_name) const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : read_experiment_config(config);
    if (config.empty()) c.name = default_name;
    if (!name.empty()) c.name = name;
    if (seed) c.master_seed = *seed;
    if (mu) c.mu = *mu;
    if (runs) {
      if (*runs < 1) throw ValidationError("--runs must be >= 1, got " + std::to_string(*runs));
      c.runs = static_cast<std::size_t>(*runs);
    }
    if (epochs) c.mlp.epochs = *epochs;
    c.validate();
    return c;
  }
};

struct LoadedData {
  FusedTable table;
  std::vector<DistressEvent> events;
};

LoadedData load_fused(const RunFlags& f) {
  const DataLayout d{f.data};
  LoadedData out{read_fused_table(pick(f.fused, d.fused())), read_events(pick(f.events, d.events()))};
  log("loaded " + std::to_string(out.table.size()) + " fused samples (semantic dim " +
      std::to_string(out.table.semantic_dim()) + ")");
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto t = std::string(io::trim(item));
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw ValidationError("bad grid value '" + t + "'");
    }
  }
  if (grid.empty()) throw ValidationError("grid must list at least one value");
  return grid;
}

std::vector<Sentence> ingest(const std::vector<BankEntity>& registry, const std::vector<Article>& articles) {
  std::vector<Sentence> sentences;
  for (const auto& a : articles)
    for (auto& s : extract_sentences(a, registry)) sentences.push_back(std::move(s));
  return sentences;
}

PvdmModel embed(const std::vector<Sentence>& sentences, const PvdmConfig& cfg, std::uint64_t min_count) {
  PvdmModel model = init_model(build_vocabulary(sentences, min_count), sentences, cfg);
  const auto report = train(model, sentences);
  for (std::size_t e = 0; e < report.epoch_mean_loss.size(); ++e)
    log("epoch " + std::to_string(e + 1) + " mean loss " + io::format_double(report.epoch_mean_loss[e]));
  return model;
}

FusedTable fuse_table(const std::vector<Sentence>& sentences, const PvdmModel& model,
                      const std::vector<QuarterlyIndicators>& indicators, const std::vector<DistressEvent>& events) {
  const auto aligned = align(sentences, indicators);
  log("aligned " + std::to_string(aligned.report.kept) + " sentences, dropped " +
      std::to_string(aligned.report.dropped));
  return build_table(sentences, aligned.aligned, events, model);
}

void print_summary(const RepeatedResult& r) {
  std::cout << std::left << std::setw(14) << to_string(r.config.arm) << " runs " << r.runs.size() << "  mean U_r "
            << std::fixed << std::setprecision(4) << r.mean << "  std " << r.std << std::defaultfloat << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bank distress early warning from news text and financial indicators"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthConfig sc;
  std::string synth_out = "data", synth_config;
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth->add_option("--config", synth_config, "SynthConfig JSON (flags override it)");
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_banks;
  std::optional<double> synth_prior, synth_text, synth_numeric, synth_delta;
  std::string synth_first, synth_last;
  synth->add_option("--seed", synth_seed, "Generator seed (default 7)");
  synth->add_option("--banks", synth_banks, "Number of banks (default 62)");
  synth->add_option("--prior", synth_prior, "Distress prior over bank-months (default 0.07)");
  synth->add_option("--text-signal", synth_text, "Text signal s_t in [0,1] (default 0.3)");
  synth->add_option("--numeric-signal", synth_numeric, "Numeric signal s_n in [0,1] (default 0.6)");
  synth->add_option("--delta", synth_delta, "Indicator shift in standard units (default 1.0)");
  synth->add_option("--first-quarter", synth_first, "First quarter, YYYYQn (default 2007Q1)");
  synth->add_option("--last-quarter", synth_last, "Last quarter, YYYYQn (default 2014Q3)");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Articles + registry -> bank-mention sentences");
  std::string ing_data = "data", ing_registry, ing_articles, ing_out;
  ingest_cmd->add_option("--data", ing_data, "Data directory")->capture_default_str();
  ingest_cmd->add_option("--registry", ing_registry, "Registry JSON (default <data>/registry.json)");
  ingest_cmd->add_option("--articles", ing_articles, "Articles JSONL (default <data>/articles.jsonl)");
  ingest_cmd->add_option("--out", ing_out, "Sentences JSONL (default <data>/sentences.jsonl)");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Train paragraph vectors over the sentences");
  std::string emb_data = "data", emb_sentences, emb_out, emb_vectors, emb_config;
  PvdmConfig pc;
  std::uint64_t min_count = 5;
  embed_cmd->add_option("--data", emb_data, "Data directory")->capture_default_str();
  embed_cmd->add_option("--sentences", emb_sentences, "Sentences JSONL (default <data>/sentences.jsonl)");
  embed_cmd->add_option("--out", emb_out, "Model file (default <data>/model.bin)");
  embed_cmd->add_option("--vectors", emb_vectors, "Also export paragraph vectors as JSONL");
  embed_cmd->add_option("--config", emb_config, "PvdmConfig JSON (flags override it)");
  std::optional<std::size_t> emb_dim, emb_window, emb_negative, emb_epochs;
  std::optional<std::uint64_t> emb_seed;
  embed_cmd->add_option("--dim", emb_dim, "Vector dimension (default 600)");
  embed_cmd->add_option("--window", emb_window, "Context words n (default 5)");
  embed_cmd->add_option("--negative", emb_negative, "Negative samples k (default 5)");
  embed_cmd->add_option("--epochs", emb_epochs, "Training epochs (default 10)");
  embed_cmd->add_option("--seed", emb_seed, "Seed (default 1)");
  embed_cmd->add_option("--min-count", min_count, "Vocabulary frequency floor")->capture_default_str();

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "Sentences + vectors + indicators + events -> fused dataset");
  std::string fu_data = "data", fu_sentences, fu_model, fu_indicators, fu_events, fu_out, fu_jsonl;
  fuse_cmd->add_option("--data", fu_data, "Data directory")->capture_default_str();
  fuse_cmd->add_option("--sentences", fu_sentences, "Sentences JSONL");
  fuse_cmd->add_option("--model", fu_model, "Embedding model");
  fuse_cmd->add_option("--indicators", fu_indicators, "Indicators CSV");
  fuse_cmd->add_option("--events", fu_events, "Events CSV");
  fuse_cmd->add_option("--out", fu_out, "Fused dataset (default <data>/fused.bin)");
  fuse_cmd->add_option("--jsonl", fu_jsonl, "Also export the fused samples as JSONL");

  // train / experiment / sweep
  auto* train_cmd = app.add_subcommand("train", "One run: fold split, training, threshold, test usefulness");
  RunFlags train_flags;
  train_flags.attach(train_cmd, false);
  std::string train_arm = "combined";
  std::size_t train_run = 0;
  train_cmd->add_option("--arm", train_arm, "text_only | numeric_only | combined")->capture_default_str();
  train_cmd->add_option("--run-index", train_run, "Run index under the master seed")->capture_default_str();

  auto* exp_cmd = app.add_subcommand("experiment", "Repeated-run protocol for one or all arms");
  RunFlags exp_flags;
  exp_flags.attach(exp_cmd, true);
  std::string exp_arm = "all";
  exp_cmd->add_option("--arm", exp_arm, "all | text_only | numeric_only | combined")->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "Sensitivity sweep of one parameter");
  RunFlags sweep_flags;
  sweep_flags.attach(sweep_cmd, true);
  std::string sweep_param = "hidden_width", sweep_grid = "10,20,50,100", sweep_arm = "combined";
  std::string sw_sentences, sw_indicators;
  sweep_cmd->add_option("--param", sweep_param, "hidden_width | hidden_layer_count | lr | l1 | dropout_p | window_n | vector_dim")
      ->capture_default_str();
  sweep_cmd->add_option("--grid", sweep_grid, "Comma-separated grid values")->capture_default_str();
  sweep_cmd->add_option("--arm", sweep_arm, "Arm to sweep")->capture_default_str();
  sweep_cmd->add_option("--sentences", sw_sentences, "Sentences JSONL (window_n / vector_dim sweeps)");
  sweep_cmd->add_option("--indicators", sw_indicators, "Indicators CSV (window_n / vector_dim sweeps)");

  auto* report_cmd = app.add_subcommand("report", "Print the summaries of a results directory");
  std::string report_dir = "results/experiment";
  report_cmd->add_option("dir", report_dir, "Results directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      if (!synth_config.empty()) from_json(nlohmann::json::parse(io::read_text(synth_config)), sc);
      if (synth_seed) sc.seed = *synth_seed;
      if (synth_banks) sc.n_banks = *synth_banks;
      if (synth_prior) sc.distress_prior = *synth_prior;
      if (synth_text) sc.text_signal = *synth_text;
      if (synth_numeric) sc.numeric_signal = *synth_numeric;
      if (synth_delta) sc.shift_delta = *synth_delta;
      if (!synth_first.empty()) sc.first_quarter = parse_quarter(synth_first);
      if (!synth_last.empty()) sc.last_quarter = parse_quarter(synth_last);
      const auto ds = generate(sc);
      write_dataset(ds, synth_out);
      const auto summary = describe(ds);
      std::cout << "banks " << summary.banks << ", articles " << summary.articles << ", sentences "
                << summary.sentences << ", events " << summary.events << ", prior " << summary.prior << '\n';
    } else if (*ingest_cmd) {
      const DataLayout d{ing_data};
      const auto registry = compile_registry(pick(ing_registry, d.registry()));
      const auto articles = read_articles(pick(ing_articles, d.articles()));
      const auto sentences = ingest(registry, articles);
      write_sentences(pick(ing_out, d.sentences()), sentences);
      std::cout << articles.size() << " articles -> " << sentences.size() << " sentences\n";
    } else if (*embed_cmd) {
      const DataLayout d{emb_data};
      if (!emb_config.empty()) from_json(nlohmann::json::parse(io::read_text(emb_config)), pc);
      if (emb_dim) pc.vector_dim = *emb_dim;
      if (emb_window) pc.window_n = *emb_window;
      if (emb_negative) pc.negative_samples = *emb_negative;
      if (emb_epochs) pc.epochs = *emb_epochs;
      if (emb_seed) pc.seed = *emb_seed;
      pc.validate();
      const auto sentences = read_sentences(pick(emb_sentences, d.sentences()));
      const auto model = embed(sentences, pc, min_count);
      save_model(model, pick(emb_out, d.model()));
      if (!emb_vectors.empty()) write_paragraph_vectors(emb_vectors, model);
      std::cout << "embedded " << sentences.size() << " sentences, vocabulary " << model.vocab.size() << ", dim "
                << model.dim() << '\n';
    } else if (*fuse_cmd) {
      const DataLayout d{fu_data};
      const auto sentences = read_sentences(pick(fu_sentences, d.sentences()));
      const auto model = load_model(pick(fu_model, d.model()));
      const auto indicators = read_indicators(pick(fu_indicators, d.indicators()));
      const auto events = read_events(pick(fu_events, d.events()));
      const auto table = fuse_table(sentences, model, indicators, events);
      write_fused_table(pick(fu_out, d.fused()), table);
      if (!fu_jsonl.empty()) write_fused_jsonl(fu_jsonl, table);
      std::cout << "fused " << table.size() << " samples\n";
    } else if (*train_cmd) {
      auto cfg = train_flags.config_with("train");
      cfg.arm = parse_arm(train_arm);
      cfg.runs = 1;
      const auto loaded = load_fused(train_flags);
      const ExperimentData data(loaded.table, loaded.events);
      const auto r = run_once(data, cfg, train_run);
      const fs::path dir = fs::path(train_flags.out) / cfg.name;
      fs::create_directories(dir);
      save_checkpoint(r.model, dir / "model.ckpt");
      write_training_curve(dir / "training_curve.csv", r.curve);
      write_month_scores(dir / "test_scores.csv", r.test_scores);
      io::write_text(dir / "run.json", nlohmann::json{{"config", cfg}, {"result", run_to_json(r)}}.dump(2) + "\n");
      std::cout << to_string(cfg.arm) << " run " << train_run << ": tau* " << r.threshold << ", test U_r "
                << r.test.relative_usefulness << " (validation " << r.validation.relative_usefulness << ")\n";
    } else if (*exp_cmd) {
      const auto base = exp_flags.config_with("experiment");
      std::vector<Arm> arms;
      if (exp_arm == "all")
        arms = {Arm::text_only, Arm::numeric_only, Arm::combined};
      else
        arms = {parse_arm(exp_arm)};
      const auto loaded = load_fused(exp_flags);
      const ExperimentData data(loaded.table, loaded.events);
      std::vector<RepeatedResult> results;
      for (Arm arm : arms) {
        auto cfg = base;
        cfg.arm = arm;
        results.push_back(run_repeated(data, cfg, exp_flags.jobs));
        print_summary(results.back());
      }
      emit_report(results, fs::path(exp_flags.out) / base.name);
    } else if (*sweep_cmd) {
      auto cfg = sweep_flags.config_with("sweep_" + sweep_param);
      if (!sweep_flags.runs && sweep_flags.config.empty()) cfg.runs = 10;
      cfg.arm = parse_arm(sweep_arm);
      const auto grid = parse_grid(sweep_grid);
      const auto loaded = load_fused(sweep_flags);
      const ExperimentData data(loaded.table, loaded.events);
      TableBuilder rebuild;
      std::vector<Sentence> sentences;
      std::vector<QuarterlyIndicators> indicators;
      if (sweep_needs_embedding(sweep_param)) {
        const DataLayout d{sweep_flags.data};
        sentences = read_sentences(pick(sw_sentences, d.sentences()));
        indicators = read_indicators(pick(sw_indicators, d.indicators()));
        rebuild = [&](const PvdmConfig& p) {
          return fuse_table(sentences, embed(sentences, p, min_count), indicators, loaded.events);
        };
      }
      const auto result = sweep(data, cfg, sweep_param, grid, sweep_flags.jobs, rebuild);
      for (const auto& p : result.points)
        std::cout << sweep_param << " = " << p.value << ": mean U_r " << p.mean << " (std " << p.std << ", "
                  << p.runs << " runs)\n";
      emit_sweep_report(result, fs::path(sweep_flags.out) / cfg.name);
    } else if (*report_cmd) {
      const fs::path dir = report_dir;
      bool any = false;
      if (fs::exists(dir / "arms.csv")) {
        std::cout << io::read_text(dir / "arms.csv");
        any = true;
      }
      for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("sweep_", 0) == 0 && entry.path().extension() == ".csv") {
          std::cout << io::read_text(entry.path());
          any = true;
        }
      }
      if (!any) throw ValidationError("no arms.csv or sweep_*.csv in " + dir.string());
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
