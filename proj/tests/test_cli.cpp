#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "ld3/error.hpp"
#include "ld3/io.hpp"

namespace ld3 {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ld3_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(LD3_CLI_PATH) + " " + args + " >" + (dir_ / "stdout.txt").string() +
                            " 2>" + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write_config(const std::string& text) const { write_text_file(path("run.cfg"), text); }

  static std::vector<std::string> lines(const fs::path& p) {
    std::istringstream is(read_text_file(p));
    std::vector<std::string> out;
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
  }

  fs::path dir_;
};

TEST_F(Cli, GenDataIsByteIdentical) {
  ASSERT_EQ(run("gen-data --seed 3 --out " + path("a.bin").string()), 0);
  ASSERT_EQ(run("gen-data --seed 3 --jobs 4 --out " + path("b.bin").string()), 0);
  const auto a = read_text_file(path("a.bin"));
  EXPECT_EQ(a, read_text_file(path("b.bin")));
  EXPECT_EQ(a.size(), kDatasetHeaderBytes + 100 * 3 * 2 * sizeof(double));
  const auto data = load_dataset(path("a.bin"));
  EXPECT_EQ(data.d, 2u);
  EXPECT_EQ(data.pairs.size(), 100u);
  EXPECT_NE(read_text_file(path("stdout.txt")).find("wrote 100 pairs"), std::string::npos);
}

TEST_F(Cli, TrainWritesArtifacts) {
  ASSERT_EQ(run("train --seed 1 --out " + path("run").string()), 0);
  const auto ckpt = load_checkpoint(path("run/checkpoint.json"));
  EXPECT_EQ(ckpt.disc.steps(), 4u);
  EXPECT_EQ(ckpt.solver.label(), "dpmpp2");
  const auto rows = lines(path("run/metrics.csv"));
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], kMetricsCsvHeader);
  // 50 training pairs, batch 2, 7 epochs; plus epochs 0..7
  EXPECT_EQ(rows.size(), 1u + 25u * 7u + 8u);
  const auto snap = read_text_file(path("run/config.txt"));
  EXPECT_EQ(RunConfig::parse(snap).seed, 1u);
}

TEST_F(Cli, TrainRerunIsByteIdentical) {
  ASSERT_EQ(run("train --seed 2 --out " + path("a").string()), 0);
  ASSERT_EQ(run("train --seed 2 --jobs 3 --out " + path("b").string()), 0);
  for (const char* f : {"checkpoint.json", "metrics.csv", "config.txt"}) {
    EXPECT_EQ(read_text_file(path("a") / f), read_text_file(path("b") / f)) << f;
  }
}

TEST_F(Cli, SampleRowsAndDeterminism) {
  ASSERT_EQ(run("train --out " + path("run").string()), 0);
  const auto ckpt = path("run/checkpoint.json").string();
  ASSERT_EQ(run("sample " + ckpt + " --n 17 --out " + path("a.csv").string()), 0);
  ASSERT_EQ(run("sample " + ckpt + " --n 17 --jobs 2 --out " + path("b.csv").string()), 0);
  const auto rows = lines(path("a.csv"));
  ASSERT_EQ(rows.size(), 18u);
  EXPECT_EQ(rows[0], "x0,x1");
  EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("b.csv")));

  cli::sample(RunConfig{}, path("run/checkpoint.json"), 17, path("lib.csv"), 1);
  EXPECT_EQ(read_text_file(path("lib.csv")), read_text_file(path("a.csv")));

  write_config("solver.family = euler\nsolver.order = 1\n");
  EXPECT_EQ(run("sample " + ckpt + " --config " + path("run.cfg").string() + " --out " +
                path("c.csv").string()),
            2);
}

TEST_F(Cli, BenchHeaderAndRerun) {
  write_config("eval.nfe_list = 4\neval.solvers = dpmpp:2\neval.count = 30\ntrain.count = 20\n"
               "train.epochs_phase1 = 1\ntrain.epochs_phase2 = 1\n");
  const auto cfg = " --config " + path("run.cfg").string();
  ASSERT_EQ(run("bench" + cfg + " --out " + path("a.csv").string()), 0);
  ASSERT_EQ(run("bench" + cfg + " --jobs 4 --out " + path("b.csv").string()), 0);
  const auto rows = lines(path("a.csv"));
  ASSERT_EQ(rows.size(), 1u + 5u);
  EXPECT_EQ(rows[0], kBenchCsvHeader);
  EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("b.csv")));
}

TEST_F(Cli, SweepSingleRadius) {
  write_config("eval.r_values = 0.1\ntrain.count = 20\ntrain.epochs_phase1 = 1\ntrain.epochs_phase2 = 1\n");
  ASSERT_EQ(run("sweep-r --config " + path("run.cfg").string() + " --out " + path("s.csv").string()), 0);
  const auto rows = lines(path("s.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "r,best_val_loss,val_hard_loss");
  EXPECT_EQ(rows[1].substr(0, 4), "0.1,");
}

TEST_F(Cli, BoundFinishesQuickly) {
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(run("bound --out " + path("b.json").string()), 0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 60.0);
  const auto text = read_text_file(path("b.json"));
  EXPECT_NE(text.find("term3_estimate"), std::string::npos);
}

TEST_F(Cli, CrossEvalMatrix) {
  write_config("train.count = 20\ntrain.epochs_phase1 = 1\ntrain.epochs_phase2 = 1\n");
  ASSERT_EQ(run("cross-eval --config " + path("run.cfg").string() + " --out " + path("x.csv").string()), 0);
  const auto rows = lines(path("x.csv"));
  ASSERT_EQ(rows.size(), 1u + 4u);
  EXPECT_EQ(rows[0], "trained,evaluated,teacher_dist");
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  write_config("train.epochs = 3\n");
  EXPECT_EQ(run("train --config " + path("run.cfg").string() + " --out " + path("r").string()), 2);
  EXPECT_NE(read_text_file(path("stderr.txt")).find("train.epochs"), std::string::npos);
  EXPECT_EQ(run("gen-data --config " + path("missing.cfg").string() + " --out " + path("a.bin").string()), 2);
  EXPECT_NE(run("no-such-command"), 0);
  EXPECT_NE(run("train"), 0);
}

}  // namespace
}  // namespace ld3
