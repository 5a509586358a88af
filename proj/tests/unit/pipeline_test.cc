#include "fabco/pipeline.h"

#include <stdexcept>

#include <gtest/gtest.h>

#include "fabco/trajectory_io.h"
#include "test_models.h"

namespace fabco {
namespace {

using testing::TempDir;

// Minutes-cheap end to end config; quality is irrelevant here.
ExperimentConfig Tiny() {
  ExperimentConfig cfg;
  cfg.seeds = {3};
  cfg.n_robot_trajectories = 40;
  cfg.idm_train.epochs = 3;
  cfg.fdm_train.epochs = 3;
  cfg.dyn_options.hidden = {16, 16};
  cfg.policy_train.epochs = 3;
  cfg.policy_options.hidden = {16};
  cfg.n_demos = 5;
  cfg.n_eval_rollouts = 4;
  cfg.rollout_max_steps = 20;
  return cfg;
}

TEST(ConfigTest, JsonRoundTrip) {
  ExperimentConfig cfg = Tiny();
  cfg.sigma_w = 0.2;
  cfg.session_fb.adaptation_rate = 0.3;
  nlohmann::json j = ConfigToJson(cfg);
  EXPECT_EQ(ConfigToJson(ConfigFromJson(j)), j);
  EXPECT_EQ(ConfigHash(ConfigFromJson(j)), ConfigHash(cfg));
}

TEST(ConfigTest, PartialOverrideKeepsDefaults) {
  ExperimentConfig cfg =
      ConfigFromJson({{"sigma_w", 0.3}, {"session_fb", {{"speed_multiplier", 2.0}}}});
  EXPECT_EQ(cfg.sigma_w, 0.3);
  EXPECT_EQ(cfg.session_fb.speed_multiplier, 2.0);
  EXPECT_EQ(cfg.session_fb.adaptation_rate, 0.5);
  EXPECT_EQ(cfg.n_demos, 50);
  EXPECT_NE(ConfigHash(cfg), ConfigHash(ExperimentConfig{}));
}

TEST(ConfigTest, UnknownOrInvalidFieldsAreRejected) {
  EXPECT_THROW(ConfigFromJson({{"sigma", 0.3}}), std::invalid_argument);
  EXPECT_THROW(ConfigFromJson({{"task", {{"tol", 1}}}}), std::invalid_argument);
  EXPECT_THROW(ConfigFromJson({{"sigma_w", -1.0}}), std::invalid_argument);
  EXPECT_THROW(ConfigFromJson({{"seeds", nlohmann::json::array()}}),
               std::invalid_argument);
}

TEST(CollectRobotDataTest, SeededAndSized) {
  ExperimentConfig cfg = Tiny();
  auto a = CollectRobotData(cfg, 1);
  EXPECT_EQ(a.size(), 40u);
  EXPECT_EQ(a[0].states.size(), 50u);
  EXPECT_EQ(a, CollectRobotData(cfg, 1));
  EXPECT_NE(a[0].states, CollectRobotData(cfg, 2)[0].states);
}

TEST(EvaluateTest, ScriptedControllerAlwaysSucceeds) {
  ExperimentConfig cfg;
  EvalReport r = EvaluateController(
      ScriptedInsertionController(cfg.env.limits, cfg.env.dt, cfg.env.task),
      "scripted", cfg, 30, 0);
  EXPECT_EQ(r.successes, 30);
  EXPECT_EQ(r.rate, 1.0);
  EXPECT_EQ(r.rollouts.size(), 30u);
}

TEST(EvaluateTest, ZeroControllerNeverSucceeds) {
  ExperimentConfig cfg;
  EvalReport r = EvaluateController([](const State&) { return Action{}; },
                                    "zero", cfg, 30, 0);
  EXPECT_EQ(r.successes, 0);
  EXPECT_EQ(r.rate, 0.0);
  for (const RolloutLog& log : r.rollouts) {
    EXPECT_EQ(log.steps, cfg.rollout_max_steps);
  }
}

TEST(EvaluateTest, SameSeedSameStarts) {
  ExperimentConfig cfg;
  auto zero = [](const State&) { return Action{}; };
  EvalReport a = EvaluateController(zero, "a", cfg, 5, 9);
  EvalReport b = EvaluateController(zero, "b", cfg, 5, 9);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.rollouts[i].start, b.rollouts[i].start);
  EXPECT_THROW(EvaluateController(zero, "c", cfg, 0, 9), std::invalid_argument);
}

TEST(FormatRateTest, OneDecimal) {
  EXPECT_EQ(FormatRate(28, 30), "28/30 93.3%");
  EXPECT_EQ(FormatRate(0, 30), "0/30 0.0%");
  EXPECT_EQ(FormatRate(30, 30), "30/30 100.0%");
}

TEST(EvalReportJsonTest, RoundTrip) {
  ExperimentConfig cfg;
  EvalReport r = EvaluateController([](const State&) { return Action{}; },
                                    "zero", cfg, 3, 1);
  EvalReport back = EvalReportFromJson(EvalReportToJson(r));
  EXPECT_EQ(back.variant, "zero");
  EXPECT_EQ(back.successes, r.successes);
  EXPECT_EQ(back.rollouts.size(), 3u);
  EXPECT_EQ(back.rollouts[1].start, r.rollouts[1].start);
  EXPECT_FALSE(EvalReportToJson(r, false).contains("rollouts"));
}

TEST(SummarizeSessionTest, ImprovementUsesFirstAndLastFifth) {
  const DynModels& dyn = testing::SharedDynModels();
  DemoSession s;
  s.feedback_enabled = false;
  DemoEnvironment env;
  SynthDemoConfig fast;
  fast.speed_multiplier = 3.0;
  std::mt19937_64 rng(1);
  for (int m = 0; m < 10; ++m) {
    SynthDemoConfig c = m < 5 ? fast : SynthDemoConfig{};
    s.demos.push_back(SynthDemo(c, SampleInitialState(rng, env.task), 50, env, m));
  }
  SessionSummary sum = SummarizeSession(s, dyn, 0.15);
  ASSERT_EQ(sum.mean_feasibility.size(), 10u);
  const auto& w = sum.mean_feasibility;
  EXPECT_NEAR(sum.improvement, (w[8] + w[9]) / 2 - (w[0] + w[1]) / 2, 1e-15);
  EXPECT_GT(sum.improvement, 0.0);
}

TEST(AblationTest, ReportShapeAndByteIdenticalRerun) {
  TempDir a, b;
  ExperimentConfig cfg = Tiny();
  ExperimentReport report = RunAblation(cfg, a.path());
  RunAblation(cfg, b.path());

  ASSERT_EQ(report.seeds.size(), 1u);
  const SeedResult& r = report.seeds[0];
  ASSERT_EQ(r.variants.size(), 4u);
  EXPECT_EQ(r.variants[0].variant, "fabco");
  EXPECT_EQ(r.variants[3].variant, "bco");
  EXPECT_EQ(r.fb.mean_feasibility.size(), 5u);
  EXPECT_EQ(r.no_fb.mean_feasibility.size(), 5u);

  nlohmann::json j = ReadJsonFile(a.path() / "report.json");
  const nlohmann::json& seed = j.at("seeds").at(0);
  EXPECT_EQ(seed.at("variants").size(), 4u);
  EXPECT_TRUE(seed.contains("session_fb"));
  EXPECT_TRUE(seed.contains("session_no_fb"));

  for (const char* f : {"report.json", "report.txt", "config.json"}) {
    EXPECT_EQ(ReadTextFile(a.path() / f), ReadTextFile(b.path() / f)) << f;
  }
  std::string table = ReadTextFile(a.path() / "report.txt");
  EXPECT_NE(table.find("FABCO"), std::string::npos);
  EXPECT_NE(table.find("/4 "), std::string::npos);
}

TEST(AblationTest, RerunInPlaceReusesStages) {
  TempDir dir;
  ExperimentConfig cfg = Tiny();
  RunAblation(cfg, dir.path());
  std::string first = ReadTextFile(dir.path() / "report.json");
  std::vector<std::string> log;
  RunAblation(cfg, dir.path(), [&](const std::string& m) { log.push_back(m); });
  EXPECT_EQ(ReadTextFile(dir.path() / "report.json"), first);
  for (const std::string& m : log) {
    EXPECT_TRUE(m.find("reusing") != std::string::npos ||
                m.find("evaluating") != std::string::npos)
        << m;
  }
}

TEST(AblationTest, ChangedPolicyConfigRetrainsOnlyPolicies) {
  TempDir dir;
  ExperimentConfig cfg = Tiny();
  RunAblation(cfg, dir.path());
  cfg.policy_train.epochs = 4;
  std::vector<std::string> log;
  RunAblation(cfg, dir.path(), [&](const std::string& m) { log.push_back(m); });
  int trained = 0;
  for (const std::string& m : log) {
    EXPECT_EQ(m.find("training dynamics"), std::string::npos);
    trained += m.find("training policy") != std::string::npos;
  }
  EXPECT_EQ(trained, 4);
}

}  // namespace
}  // namespace fabco
