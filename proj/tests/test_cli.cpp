#include "dcrkit/cohort_io.hpp"
#include "dcrkit/prognosis.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

using namespace dcrkit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const fs::path& dir, const std::string& args) {
  const fs::path log = dir / "cli_output.txt";
  const std::string cmd = std::string(DCRKIT_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = fs::exists(log) ? read_file(log) : "";
  return r;
}

const char* kSimConfig =
    "n = 100\nk = 3\nd_static = 2\nd_dynamic = 4\n"
    "rates = 0.03, 0.03, 0.03\n"
    "beta_1 = 1.5, 0, 0, 0, 0.5, 0\nbeta_2 = -1, 1.2, 0, 0, 0, 0\nbeta_3 = 0, 0, 1.2, 0, 0, -0.5\n"
    "censor_rate = 0.002\nseed = 4\n";

const char* kTrainConfig =
    "learning_rate = 0.001\nalpha = 1\nbeta = 0.1\ndropout = 0.2\nhidden = 4\nmax_epochs = 2\npatience = 2\n";

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = dcrkit::testing::scratch_dir(std::string("cli_") + info->name());
    write_file_atomic(dir / "sim.cfg", kSimConfig);
    write_file_atomic(dir / "train.cfg", kTrainConfig);
  }

  fs::path p(const std::string& name) const { return dir / name; }

  void simulate(const std::string& out = "cohort.jsonl") {
    const auto r = cli(dir, "simulate --config " + p("sim.cfg").string() + " --out " + p(out).string());
    ASSERT_EQ(r.code, 0) << r.output;
  }

  void train(const std::string& kind, const std::string& out) {
    const auto r = cli(dir, "train --cohort " + p("cohort.jsonl").string() + " --model " + kind + " --config " +
                                p("train.cfg").string() + " --out " + p(out).string());
    ASSERT_EQ(r.code, 0) << r.output;
  }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, SimulateWritesRequestedRecordsDeterministically) {
  simulate("a.jsonl");
  simulate("b.jsonl");
  EXPECT_EQ(read_cohort(p("a.jsonl")).size(), 100u);
  EXPECT_EQ(read_file(p("a.jsonl")), read_file(p("b.jsonl")));
  const auto r = cli(dir, "simulate --config " + p("sim.cfg").string() + " --out " + p("c.jsonl").string() +
                              " --seed 5");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(read_file(p("a.jsonl")), read_file(p("c.jsonl")));
  EXPECT_NE(r.output.find("# effective config"), std::string::npos);
}

TEST_F(Cli, SimulateRejectsNegativeCensorRate) {
  write_file_atomic(p("bad.cfg"), "n = 10\ncensor_rate = -0.5\n");
  const auto r = cli(dir, "simulate --config " + p("bad.cfg").string() + " --out " + p("x.jsonl").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("censor_rate"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("line 2"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(p("x.jsonl")));
}

TEST_F(Cli, UnknownCommandsAndFlagsExitTwo) {
  EXPECT_EQ(cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(cli(dir, "simulate --config").code, 2);
  EXPECT_EQ(cli(dir, "train --cohort " + p("absent.jsonl").string() + " --model deephit --out x").code, 2);
}

TEST_F(Cli, TrainFineGrayLogsNotice) {
  simulate();
  const auto r = cli(dir, "train --cohort " + p("cohort.jsonl").string() + " --model finegray --config " +
                              p("train.cfg").string() + " --out " + p("fg.dcr").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("notice: finegray has no hyperparameters"), std::string::npos) << r.output;
  EXPECT_EQ(load_model(p("fg.dcr")).kind(), ModelKind::finegray);
}

TEST_F(Cli, TrainDeepHitRecordsHyperparametersAndLog) {
  simulate();
  train("deephit", "dh.dcr");
  const std::string bytes = read_file(p("dh.dcr"));
  const std::string header = bytes.substr(0, bytes.find('\n', bytes.find('\n') + 1));
  EXPECT_NE(header.find("\"hyperparameters\""), std::string::npos);
  EXPECT_NE(header.find("\"learning_rate\":0.001"), std::string::npos) << header;
  const std::string log = read_file(p("dh.dcr.log"));
  EXPECT_EQ(log.rfind("epoch\ttrain_loss\tvalidation_cindex\n", 0), 0u);
  EXPECT_EQ(count(log, "\n"), 1u + 2u + 2u);
}

TEST_F(Cli, TrainAllCensoredExitsThree) {
  simulate();
  Cohort c = read_cohort(p("cohort.jsonl"));
  for (auto& s : c.subjects) s.outcome.event = 0;
  write_cohort(c, p("censored.jsonl"));
  const auto r = cli(dir, "train --cohort " + p("censored.jsonl").string() + " --model deephit --config " +
                              p("train.cfg").string() + " --out " + p("m.dcr").string());
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_FALSE(fs::exists(p("m.dcr")));
}

TEST_F(Cli, PredictFieldsAndAlphaReduction) {
  simulate();
  train("finegray", "fg.dcr");
  const std::string base = "predict --model " + p("fg.dcr").string() + " --cohort " + p("cohort.jsonl").string() +
                           " --t 6 --deltas 24,48";
  ASSERT_EQ(cli(dir, base + " --out " + p("cond.csv").string()).code, 0);
  ASSERT_EQ(cli(dir, base + " --variant alpha --alpha 0 --out " + p("alpha.csv").string()).code, 0);
  const auto cond = read_csv(p("cond.csv"));
  const auto alpha = read_csv(p("alpha.csv"));
  EXPECT_EQ(cond[0], (std::vector<std::string>{"subject", "t", "delta", "F_awakening", "F_death", "F_withdrawal",
                                               "p_awaken", "p_death", "label"}));
  EXPECT_EQ(alpha[0].back(), "p_death_alpha");
  ASSERT_EQ(cond.size(), alpha.size());
  ASSERT_GT(cond.size(), 1u);
  for (std::size_t i = 1; i < cond.size(); ++i) {
    // alpha = 0: the awakening probability is F_1 itself.
    EXPECT_EQ(alpha[i][6], alpha[i][3]);
    const double pa = std::stod(cond[i][6]);
    const double pd = std::stod(cond[i][7]);
    EXPECT_GE(pa, 0.0);
    EXPECT_GE(pd, 0.0);
    EXPECT_LE(pa + pd, 1.0 + 1e-12);
    EXPECT_EQ(cond[i][8], pd < pa ? "awaken" : "death");
  }
}

TEST_F(Cli, PredictValidation) {
  simulate();
  train("finegray", "fg.dcr");
  const std::string base = "predict --model " + p("fg.dcr").string() + " --t 6 --out " + p("o.csv").string();
  auto r = cli(dir, base + " --cohort " + p("cohort.jsonl").string() + " --variant alpha");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--alpha"), std::string::npos) << r.output;

  write_file_atomic(p("sim2.cfg"), "n = 20\nk = 2\nd_dynamic = 6\nseed = 3\n");
  ASSERT_EQ(cli(dir, "simulate --config " + p("sim2.cfg").string() + " --out " + p("k2.jsonl").string()).code, 0);
  r = cli(dir, base + " --cohort " + p("k2.jsonl").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("k = 3"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("k = 2"), std::string::npos) << r.output;
}

TEST_F(Cli, PredictBeyondHorizonWarnsAndHoldsLastValue) {
  simulate();
  train("deephit", "dh.dcr");
  const std::string base = "predict --model " + p("dh.dcr").string() + " --cohort " + p("cohort.jsonl").string() + " --t 6";
  auto r = cli(dir, base + " --deltas 24 --out " + p("near.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.find("warning"), std::string::npos) << r.output;
  r = cli(dir, base + " --deltas 100000,200000 --out " + p("far.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("warning: delta 100000"), std::string::npos) << r.output;
  const auto far = read_csv(p("far.csv"));
  ASSERT_GT(far.size(), 2u);
  for (std::size_t i = 1; i + 1 < far.size(); i += 2) {
    for (std::size_t c = 3; c < far[i].size(); ++c) EXPECT_EQ(far[i][c], far[i + 1][c]);
  }
}

TEST_F(Cli, HeatmapPlotHasThirtySixCells) {
  simulate();
  train("finegray", "fg.dcr");
  ASSERT_EQ(cli(dir, "predict --model " + p("fg.dcr").string() + " --cohort " + p("cohort.jsonl").string() +
                         " --heatmap 0 --out " + p("heat.csv").string())
                .code,
            0);
  const auto grid = parse_heatmap(read_file(p("heat.csv")));
  EXPECT_EQ(grid.values.rows(), 3);
  EXPECT_EQ(grid.values.cols(), 12);
  const auto r = cli(dir, "plot --input " + p("heat.csv").string() + " --kind heatmap --out " + p("heat.svg").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(count(read_file(p("heat.svg")), "<rect class=\"cell\""), 36u);

  write_file_atomic(p("broken.csv"), "delta,1,2\n24,0.5\n");
  EXPECT_EQ(cli(dir, "plot --input " + p("broken.csv").string() + " --kind heatmap --out " + p("b.svg").string()).code,
            2);
  EXPECT_EQ(cli(dir, "plot --input " + p("heat.csv").string() + " --kind pie --out " + p("b.svg").string()).code, 2);
}

TEST_F(Cli, EvaluateScoresModelAndPlotsRoc) {
  simulate();
  train("finegray", "fg.dcr");
  write_file_atomic(p("eval.cfg"), "t_values = 6\ndeltas = 24, 48\n");
  const auto r = cli(dir, "evaluate --model " + p("fg.dcr").string() + " --cohort " + p("cohort.jsonl").string() +
                              " --config " + p("eval.cfg").string() + " --out-dir " + p("eval").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string tsv = read_file(p("eval/metrics.tsv"));
  EXPECT_EQ(count(tsv, "c-index\t"), 3u * 2u);
  EXPECT_EQ(count(tsv, "auroc\t"), 2u);
  ASSERT_EQ(cli(dir, "plot --input " + p("eval/roc.csv").string() + " --kind roc --out " + p("roc.svg").string()).code,
            0);
  EXPECT_EQ(count(read_file(p("roc.svg")), "<polyline class=\"roc\""), 2u);
}

TEST_F(Cli, AblateEmitsThreeTableSets) {
  simulate();
  write_file_atomic(p("exp.cfg"), "models = finegray\nsplits = 2\n");
  const auto r = cli(dir, "ablate --cohort " + p("cohort.jsonl").string() + " --config " + p("exp.cfg").string() +
                              " --out-dir " + p("ab").string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* tag : {"3-risk", "2-risk", "1-risk"}) {
    EXPECT_TRUE(fs::exists(p("ab") / (std::string(tag) + ".tsv"))) << tag;
    EXPECT_NE(r.output.find(std::string("Setting: ") + tag), std::string::npos) << tag;
  }
  const std::string one = read_file(p("ab/1-risk.txt"));
  EXPECT_EQ(one.find("death"), std::string::npos);
  EXPECT_EQ(one.find("AUROC"), std::string::npos);
}
