#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"

using namespace distress;
using namespace distress::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args, const fs::path& cwd) {
  const auto log = cwd / "cli_output.txt";
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + std::string(DISTRESS_CLI) + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = io::read_text(log);
  return o;
}

// One shared workspace with a small dataset pushed through every stage.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch_dir("cli"));
    const std::vector<std::string> stages = {
        "synth --out data --banks 8 --first-quarter 2009Q1 --last-quarter 2010Q4 --prior 0.12 --seed 5",
        "ingest --data data", "embed --data data --dim 8 --epochs 2", "fuse --data data"};
    for (const auto& s : stages) {
      const auto o = cli(s, *dir_);
      ASSERT_EQ(o.code, 0) << s << "\n" << o.out;
    }
  }
  static void TearDownTestSuite() { delete dir_; }
  static inline fs::path* dir_ = nullptr;
};

}  // namespace

TEST_F(Cli, StagesProduceFiles) {
  for (const char* f : {"registry.json", "articles.jsonl", "sentences.jsonl", "model.bin", "fused.bin", "manifest.json"})
    EXPECT_TRUE(fs::exists(*dir_ / "data" / f)) << f;
  const auto model = load_model(*dir_ / "data" / "model.bin");
  EXPECT_EQ(model.dim(), 8u);
}

TEST_F(Cli, ExperimentWritesReport) {
  const auto o = cli("experiment --data data --runs 2 --epochs 3 --mu 0.8 --name exp --seed 4", *dir_);
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("combined"), std::string::npos);
  const auto summary = nlohmann::json::parse(io::read_text(*dir_ / "results" / "exp" / "summary.json"));
  ASSERT_EQ(summary["experiments"].size(), 3u);
  for (const auto& e : summary["experiments"]) {
    EXPECT_EQ(e["config"]["mu"], 0.8);
    EXPECT_EQ(e["runs"], 2);
  }
  const auto rep = cli("report results/exp", *dir_);
  EXPECT_EQ(rep.code, 0);
  EXPECT_NE(rep.out.find("arm,runs,mean_U_r,std_U_r"), std::string::npos);
}

TEST_F(Cli, TrainAndSweep) {
  const auto t = cli("train --data data --arm numeric_only --epochs 2 --name one", *dir_);
  ASSERT_EQ(t.code, 0) << t.out;
  for (const char* f : {"model.ckpt", "training_curve.csv", "test_scores.csv", "run.json"})
    EXPECT_TRUE(fs::exists(*dir_ / "results" / "one" / f)) << f;
  const auto s = cli("sweep --data data --param hidden_width --grid 4,8 --runs 1 --epochs 2 --arm numeric_only", *dir_);
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_TRUE(fs::exists(*dir_ / "results" / "sweep_hidden_width" / "sweep_hidden_width.csv"));
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  EXPECT_EQ(cli("experiment --data data --runs 0", *dir_).code, 1);
  EXPECT_EQ(cli("experiment --data data --arm sideways", *dir_).code, 1);
  EXPECT_EQ(cli("ingest --data nowhere", *dir_).code, 2);
  EXPECT_EQ(cli("fuse --data data --events missing.csv", *dir_).code, 2);
  EXPECT_EQ(cli("sweep --data data --param momentum --runs 1", *dir_).code, 1);
  EXPECT_EQ(cli("frobnicate", *dir_).code, 1);
  EXPECT_EQ(cli("--help", *dir_).code, 0);
}
