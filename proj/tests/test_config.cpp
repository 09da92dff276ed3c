#include <gtest/gtest.h>

#include "ld3/config.hpp"
#include "ld3/error.hpp"

namespace ld3 {
namespace {

TEST(KeyValues, ParsesCommentsAndOverrides) {
  const auto kv = parse_key_values("# comment\n\n a.b = 1 \nc = x y\na.b=2\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("a.b"), "2");
  EXPECT_EQ(kv.at("c"), "x y");
  EXPECT_THROW(parse_key_values("no equals sign"), ConfigError);
}

TEST(RunConfig, Defaults) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.schedule.family, ScheduleFamily::VeEdm);
  EXPECT_EQ(cfg.schedule.T, 80.0);
  EXPECT_EQ(cfg.schedule.t_min, 0.002);
  EXPECT_EQ(cfg.solver.family, SolverFamily::Dpmpp);
  EXPECT_EQ(cfg.solver.order, 2);
  EXPECT_EQ(cfg.solver.nfe, 4u);
  EXPECT_EQ(cfg.teacher.solver.nfe, 100u);
  EXPECT_EQ(cfg.teacher.grid, Heuristic::LogSnr);
  EXPECT_EQ(cfg.train_count, 100u);
  EXPECT_EQ(cfg.train.gamma, 0.001);
  EXPECT_EQ(cfg.train.batch, 2u);
  EXPECT_EQ(cfg.train.epochs_phase1, 2u);
  EXPECT_EQ(cfg.train.epochs_phase2, 5u);
  EXPECT_EQ(cfg.data_d, 2u);
  EXPECT_EQ(cfg.mixture().components().size(), default_mixture().components().size());
  EXPECT_EQ(RunConfig::parse("").snapshot(), cfg.snapshot());
}

TEST(RunConfig, UnknownKeyIsNamed) {
  try {
    RunConfig::parse("train.epochs = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.epochs"), std::string::npos);
  }
}

TEST(RunConfig, FamilyDefaultsApplyBeforeOverrides) {
  const auto vp = RunConfig::parse("schedule.family = vp_linear\n");
  EXPECT_EQ(vp.schedule.T, 1.0);
  EXPECT_EQ(vp.schedule.t_min, 1e-3);
  EXPECT_EQ(vp.schedule.beta_0, 0.1);
  EXPECT_EQ(vp.schedule.beta_1, 20.0);
  const auto custom = RunConfig::parse("schedule.t_min = 0.01\nschedule.family = vp_linear\n");
  EXPECT_EQ(custom.schedule.t_min, 0.01);
  EXPECT_EQ(custom.schedule.T, 1.0);
}

TEST(RunConfig, SnapshotRoundTrip) {
  const std::string text =
      "seed = 7\nsolver.family = ipndm\nsolver.order = 3\nsolver.nfe = 6\n"
      "train.r = 0.25\ntrain.lr_xic = auto\neval.nfe_list = 4, 5\n"
      "eval.solvers = euler:1, dpmpp:1\ndata.kind = point\n";
  const auto cfg = RunConfig::parse(text);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.solver.family, SolverFamily::Ipndm);
  EXPECT_EQ(cfg.train.r, 0.25);
  EXPECT_FALSE(cfg.train.lr_xic.has_value());
  EXPECT_EQ(cfg.eval_nfe_list, (std::vector<std::size_t>{4, 5}));
  ASSERT_EQ(cfg.eval_solvers.size(), 2u);
  EXPECT_EQ(cfg.eval_solvers[0].family, SolverFamily::Euler);
  const auto snap = cfg.snapshot();
  EXPECT_EQ(RunConfig::parse(snap).snapshot(), snap);
  std::size_t lines = 0;
  for (char c : snap) lines += c == '\n';
  EXPECT_EQ(lines, RunConfig::known_keys().size());
}

TEST(RunConfig, RejectsBadValues) {
  for (const char* text : {"seed = -1\n", "solver.nfe = 0\n", "solver.order = 3\n",
                           "solver.family = heun\n", "train.batch = two\n", "train.lr_xi = -1\n",
                           "teacher.nfe = 3\n", "train.count = 1\n", "data.d = 0\n",
                           "schedule.family = cosine\n", "schedule.t_min = 100\n",
                           "eval.solvers = dpmpp:3\n", "train.record_wall_time = maybe\n"}) {
    EXPECT_THROW(RunConfig::parse(text), ConfigError) << text;
  }
}

TEST(RunConfig, PointDataAndBenchSetup) {
  const auto cfg = RunConfig::parse("data.kind = point\ndata.means = 1.5, -2\neval.methods = edm, ld3\n");
  const auto den = cfg.make_denoiser();
  EXPECT_EQ(den->dim(), 2u);
  const auto setup = cfg.bench_setup();
  ASSERT_EQ(setup.heuristics.size(), 1u);
  EXPECT_EQ(setup.heuristics[0], Heuristic::Edm);
  EXPECT_TRUE(setup.include_ld3);
  EXPECT_THROW(RunConfig::parse("eval.methods = best\n"), ConfigError);
}

}  // namespace
}  // namespace ld3
