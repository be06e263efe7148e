#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace distress;
using namespace distress::testing;

namespace {

const Pipeline& pipeline() {
  static const Pipeline p = small_pipeline(3, 8);
  return p;
}

ExperimentConfig quick(Arm arm, std::size_t runs = 2) {
  ExperimentConfig c;
  c.arm = arm;
  c.runs = runs;
  c.mlp.epochs = 4;
  c.mlp.lr = 0.01;
  c.master_seed = 9;
  return c;
}

}  // namespace

TEST(Split, RolesDisjointAndNormalizationTrainOnly) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  const auto cfg = quick(Arm::combined);
  for (std::size_t run = 0; run < 100; ++run) {
    const auto s = split_run(data, cfg, run);
    std::set<std::string> train(s.train_banks.begin(), s.train_banks.end());
    std::set<std::string> val(s.validation_banks.begin(), s.validation_banks.end());
    std::set<std::string> test(s.test_banks.begin(), s.test_banks.end());
    ASSERT_EQ(train.size() + val.size() + test.size(), data.banks.size());
    for (const auto& b : data.banks) ASSERT_EQ(train.count(b) + val.count(b) + test.count(b), 1u) << b;

    // Recompute the statistics from training columns only; they must match
    // what the run uses bit for bit.
    std::vector<IndicatorValues> rows;
    for (auto c : s.train_cols) {
      ASSERT_TRUE(train.contains(p.table.key(static_cast<std::size_t>(c)).bank_id));
      rows.push_back(p.table.raw_indicators(static_cast<std::size_t>(c)));
    }
    const auto ref = fit_normalization(rows);
    ASSERT_EQ(s.normalization.mean, ref.mean);
    ASSERT_EQ(s.normalization.std, ref.std);
    ASSERT_EQ(s.normalization.samples, s.train_cols.size());
    for (int f : s.normalization.source_folds) ASSERT_NE(static_cast<std::size_t>(f), s.folds.test_fold);
    for (const auto& b : s.normalization.source_banks) ASSERT_FALSE(test.contains(b));
  }
}

TEST(RunOnce, SameSeedSameResult) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  const auto a = run_once(data, quick(Arm::combined), 0);
  const auto b = run_once(data, quick(Arm::combined), 0);
  EXPECT_EQ(a.test.relative_usefulness, b.test.relative_usefulness);
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_EQ(a.model.layers[0].weights, b.model.layers[0].weights);
  const auto c = run_once(data, quick(Arm::combined), 1);
  EXPECT_NE(a.seed, c.seed);
  EXPECT_GE(a.validation.relative_usefulness, -1e300);
  EXPECT_EQ(a.curve.size(), 4u);
}

TEST(RunOnce, NumericArmNeverReadsSemantics) {
  const auto& p = pipeline();
  FusedTable perturbed = p.table;
  const ExperimentData data(p.table, p.ds.events);
  p.table.reset_semantic_reads();
  const auto a = run_once(data, quick(Arm::numeric_only), 0);
  EXPECT_EQ(p.table.semantic_reads(), 0u);

  Rng rng(1);
  for (Eigen::Index i = 0; i < perturbed.mutable_semantic().size(); ++i)
    perturbed.mutable_semantic().data()[i] = normal(rng);
  const ExperimentData other(perturbed, p.ds.events);
  const auto b = run_once(other, quick(Arm::numeric_only), 0);
  EXPECT_EQ(a.test.relative_usefulness, b.test.relative_usefulness);
  EXPECT_EQ(a.model.layers[0].weights, b.model.layers[0].weights);

  (void)run_once(data, quick(Arm::text_only), 0);
  EXPECT_GT(p.table.semantic_reads(), 0u);
}

TEST(Repeated, SingleRunHasZeroStd) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  const auto r = run_repeated(data, quick(Arm::numeric_only, 1));
  EXPECT_EQ(r.std, 0.0);
  EXPECT_EQ(r.mean, r.runs[0].test.relative_usefulness);
  auto bad = quick(Arm::numeric_only, 1);
  bad.runs = 0;
  EXPECT_THROW(run_repeated(data, bad), ValidationError);
}

TEST(Repeated, PrefixStableAndThreadIndependent) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  const auto two = run_repeated(data, quick(Arm::numeric_only, 2));
  const auto four = run_repeated(data, quick(Arm::numeric_only, 4), 3);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(two.runs[i].test.relative_usefulness, four.runs[i].test.relative_usefulness);
    EXPECT_EQ(two.runs[i].seed, four.runs[i].seed);
  }
}

TEST(MeanStd, SampleConvention) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const auto [m, s] = mean_and_std(v);
  EXPECT_EQ(m, 2.5);
  EXPECT_NEAR(s, std::sqrt(5.0 / 3.0), 1e-15);
}

TEST(Sweep, ShapeAndErrors) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  const auto s = sweep(data, quick(Arm::numeric_only, 1), "hidden_width", {4, 8});
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_EQ(s.points[0].value, 4.0);
  EXPECT_EQ(s.details[1].config.mlp.hidden_layers, (std::vector<std::size_t>{8}));
  EXPECT_EQ(s.points[1].runs, 1u);
  EXPECT_THROW(sweep(data, quick(Arm::numeric_only, 1), "momentum", {0.5}), ValidationError);
  EXPECT_THROW(sweep(data, quick(Arm::numeric_only, 1), "hidden_width", {}), ValidationError);
  EXPECT_THROW(sweep(data, quick(Arm::numeric_only, 1), "hidden_width", {2.5}), ValidationError);
  EXPECT_THROW(sweep(data, quick(Arm::numeric_only, 1), "vector_dim", {8}), ValidationError);
  EXPECT_EQ(with_parameter(quick(Arm::combined), "hidden_layer_count", 2).mlp.hidden_layers,
            (std::vector<std::size_t>{50, 50}));

  const auto dir = scratch_dir("sweep");
  emit_sweep_report(s, dir);
  const auto csv = io::read_text(dir / "sweep_hidden_width.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "hidden_width,runs,mean_U_r,std_U_r");
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
}

TEST(Sweep, EmbeddingParametersRebuild) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  std::vector<std::size_t> dims;
  const TableBuilder rebuild = [&](const PvdmConfig& c) {
    dims.push_back(c.vector_dim);
    auto m = init_model(build_vocabulary(p.sentences, 2), p.sentences, c);
    const auto aligned = align(p.sentences, p.ds.indicators);
    return build_table(p.sentences, aligned.aligned, p.ds.events, m);
  };
  auto cfg = quick(Arm::text_only, 1);
  cfg.pvdm.epochs = 1;
  const auto s = sweep(data, cfg, "vector_dim", {4, 6}, 1, rebuild);
  EXPECT_EQ(dims, (std::vector<std::size_t>{4, 6}));
  EXPECT_EQ(s.details[1].runs[0].model.config.input_dim, 6u);
}

TEST(Report, FilesAndRows) {
  const auto& p = pipeline();
  const ExperimentData data(p.table, p.ds.events);
  std::vector<RepeatedResult> results = {run_repeated(data, quick(Arm::numeric_only, 2)),
                                         run_repeated(data, quick(Arm::text_only, 1))};
  const auto dir = scratch_dir("report");
  emit_report(results, dir);
  const auto runs = io::read_text(dir / "runs.csv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 4);
  EXPECT_EQ(runs.substr(0, runs.find('\n') + 1), kRunsHeader);
  const auto summary = nlohmann::json::parse(io::read_text(dir / "summary.json"));
  ASSERT_EQ(summary["experiments"].size(), 2u);
  EXPECT_EQ(summary["experiments"][0]["arm"], "numeric_only");
  EXPECT_EQ(summary["experiments"][0]["mean_U_r"], results[0].mean);
  const auto arms = io::read_text(dir / "arms.csv");
  EXPECT_EQ(arms.substr(0, arms.find('\n')), "arm,runs,mean_U_r,std_U_r");
}

TEST(Config, JsonRoundTripAndValidation) {
  auto c = quick(Arm::text_only, 7);
  c.mu = 0.8;
  nlohmann::json j = c;
  ExperimentConfig back;
  from_json(j, back);
  EXPECT_EQ(back.runs, 7u);
  EXPECT_EQ(back.arm, Arm::text_only);
  EXPECT_EQ(back.mu, 0.8);
  EXPECT_EQ(back.mlp.epochs, 4u);
  j["runs"] = 0;
  EXPECT_THROW(from_json(j, back), ValidationError);
  const ExperimentConfig defaults;
  EXPECT_EQ(defaults.runs, 50u);
  EXPECT_EQ(defaults.mu, 0.9);
}
