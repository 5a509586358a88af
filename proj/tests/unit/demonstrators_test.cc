#include "fabco/demonstrators.h"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "fabco/trajectory_io.h"
#include "test_models.h"

namespace fabco {
namespace {

using testing::SharedDynModels;

State Start(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return SampleInitialState(rng, TaskSpec{});
}

// Fraction of moving transitions with some component faster than the
// robot. The dwell at the slot does not count as part of the path.
double FractionOverBound(const Trajectory& t, const RobotLimits& limits) {
  auto bound = limits.MaxStep(t.dt);
  int over = 0, moving = 0;
  for (size_t k = 0; k + 1 < t.states.size(); ++k) {
    bool moved = false, fast = false;
    for (int i = 0; i < 3; ++i) {
      double d = std::abs(t.states[k + 1].pose[i] - t.states[k].pose[i]);
      moved = moved || d > 0.0;
      fast = fast || d > bound[i] + 1e-12;
    }
    moving += moved;
    over += fast;
  }
  return moving == 0 ? 0.0 : static_cast<double>(over) / moving;
}

TEST(SynthDemoTest, FeasibleSpeedStaysWithinBound) {
  DemoEnvironment env;
  SynthDemoConfig cfg;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Trajectory t = SynthDemo(cfg, Start(s), env.max_steps, env, s);
    EXPECT_EQ(FractionOverBound(t, env.limits), 0.0);
    EXPECT_FALSE(t.actions.has_value());
    EXPECT_EQ(t.source, TrajectorySource::kSyntheticDemo);
  }
}

TEST(SynthDemoTest, TripleSpeedMostlyExceedsBound) {
  DemoEnvironment env;
  SynthDemoConfig cfg;
  cfg.speed_multiplier = 3.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Trajectory t = SynthDemo(cfg, Start(s), env.max_steps, env, s);
    EXPECT_GE(FractionOverBound(t, env.limits), 0.5) << "seed " << s;
  }
}

TEST(SynthDemoTest, EndsOnTheSlotAndHolds) {
  DemoEnvironment env;
  SynthDemoConfig cfg;
  State s0 = Start(3);
  Trajectory t = SynthDemo(cfg, s0, env.max_steps, env, 3);
  ASSERT_GT(t.states.size(), 4u);
  EXPECT_LT(t.states.size(), static_cast<size_t>(env.max_steps));
  for (size_t k = t.states.size() - 4; k < t.states.size(); ++k) {
    EXPECT_EQ(t.states[k].pose, s0.obs.slot_pose);
  }
  EXPECT_TRUE(TaskSuccess(t, env.task));
}

TEST(SynthDemoTest, DeterministicPerSeed) {
  DemoEnvironment env;
  SynthDemoConfig cfg;
  cfg.jitter_std = 0.002;
  EXPECT_EQ(SynthDemo(cfg, Start(1), 50, env, 9),
            SynthDemo(cfg, Start(1), 50, env, 9));
  EXPECT_NE(SynthDemo(cfg, Start(1), 50, env, 9).states,
            SynthDemo(cfg, Start(1), 50, env, 10).states);
}

TEST(SynthDemoTest, StepBudgetCapsLength) {
  DemoEnvironment env;
  SynthDemoConfig cfg;
  cfg.speed_multiplier = 0.2;
  EXPECT_EQ(SynthDemo(cfg, Start(1), 12, env, 0).states.size(), 12u);
}

TEST(SynthDemoTest, InvalidConfigThrows) {
  DemoEnvironment env;
  SynthDemoConfig cfg;
  cfg.speed_multiplier = -1.0;
  EXPECT_THROW(SynthDemo(cfg, Start(1), 50, env, 0), std::invalid_argument);
  EXPECT_THROW(SynthDemo(SynthDemoConfig{}, Start(1), 1, env, 0),
               std::invalid_argument);
}

double Window(const std::vector<double>& v, size_t begin, size_t end) {
  return std::accumulate(v.begin() + begin, v.begin() + end, 0.0) /
         static_cast<double>(end - begin);
}

SynthDemoConfig Adaptive(bool feedback, double adaptation) {
  SynthDemoConfig cfg;
  cfg.speed_multiplier = 3.0;
  cfg.adaptation_rate = adaptation;
  cfg.feedback_enabled = feedback;
  cfg.rng_seed = 21;
  return cfg;
}

TEST(RunSessionTest, FeedbackImprovesFeasibility) {
  const DynModels& dyn = SharedDynModels();
  DemoEnvironment env;
  DemoSession s = RunSession(Adaptive(true, 0.5), 50, dyn.idm, dyn.fdm, 0.15, env);
  ASSERT_EQ(s.demos.size(), 50u);
  ASSERT_TRUE(s.profiles.has_value());
  EXPECT_EQ(s.profiles->size(), 50u);
  auto w = SessionMeanFeasibility(s, dyn.idm, dyn.fdm, 0.15);
  EXPECT_GE(Window(w, 40, 50) - Window(w, 0, 10), 0.15);
  EXPECT_LT(s.speed_history.back(), s.speed_history.front());
  for (size_t m = 1; m < s.speed_history.size(); ++m) {
    EXPECT_LE(s.speed_history[m], s.speed_history[m - 1]);
    EXPECT_GE(s.speed_history[m], 1.0);
  }
}

TEST(RunSessionTest, NoFeedbackShowsNoTrend) {
  const DynModels& dyn = SharedDynModels();
  DemoEnvironment env;
  DemoSession s =
      RunSession(Adaptive(false, 0.5), 50, dyn.idm, dyn.fdm, 0.15, env);
  EXPECT_FALSE(s.profiles.has_value());
  auto w = SessionMeanFeasibility(s, dyn.idm, dyn.fdm, 0.15);
  EXPECT_LT(std::abs(Window(w, 40, 50) - Window(w, 0, 10)), 0.05);
  for (double v : s.speed_history) EXPECT_EQ(v, 3.0);
}

TEST(RunSessionTest, ZeroAdaptationWithFeedbackMatchesNoFeedback) {
  const DynModels& dyn = SharedDynModels();
  DemoEnvironment env;
  DemoSession fb = RunSession(Adaptive(true, 0.0), 20, dyn.idm, dyn.fdm, 0.15, env);
  DemoSession no_fb =
      RunSession(Adaptive(false, 0.0), 20, dyn.idm, dyn.fdm, 0.15, env);
  EXPECT_EQ(fb.demos, no_fb.demos);
  EXPECT_EQ(fb.speed_history, no_fb.speed_history);
}

TEST(RunSessionTest, StoredProfilesMatchRescoring) {
  const DynModels& dyn = SharedDynModels();
  DemoEnvironment env;
  DemoSession s = RunSession(Adaptive(true, 0.5), 5, dyn.idm, dyn.fdm, 0.15, env);
  auto stored = SessionMeanFeasibility(s, dyn.idm, dyn.fdm, 0.15);
  s.profiles.reset();
  EXPECT_EQ(SessionMeanFeasibility(s, dyn.idm, dyn.fdm, 0.15), stored);
}

TEST(SessionIoTest, SaveLoadRoundTrip) {
  const DynModels& dyn = SharedDynModels();
  DemoEnvironment env;
  DemoSession s = RunSession(Adaptive(true, 0.5), 4, dyn.idm, dyn.fdm, 0.15, env);
  testing::TempDir dir;
  SaveSession(s, dir.path() / "fb");
  DemoSession back = LoadSession(dir.path() / "fb");
  EXPECT_EQ(back.demos, s.demos);
  EXPECT_EQ(back.feedback_enabled, true);
  EXPECT_EQ(back.speed_history, s.speed_history);
  ASSERT_TRUE(back.profiles.has_value());
  EXPECT_EQ(back.profiles->at(2).weights, s.profiles->at(2).weights);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "fb" / "manifest.json"));
}

EnvObservation Slot() { return {{0.5, 0.8, 0.5}, 0.03}; }

TEST(IngestTest, TwoPointsOneDtApart) {
  Trajectory t = IngestHumanDemo({{0.1, 0.1, 0.5, 0.0}, {0.12, 0.1, 0.5, 0.1}},
                                 0.1, Slot(), "h");
  ASSERT_EQ(t.states.size(), 2u);
  EXPECT_EQ(t.states[1].pose.x, 0.12);
  EXPECT_EQ(t.source, TrajectorySource::kHumanDemo);
  EXPECT_EQ(t.states[0].obs, Slot());
}

TEST(IngestTest, DenseStrokeIsResampled) {
  std::vector<RawPoint> pts;
  for (int i = 0; i < 1000; ++i) {
    double t = 5.0 * i / 999.0;
    pts.push_back({0.1 + 0.1 * t, 0.2, 0.5, t});
  }
  Trajectory traj = IngestHumanDemo(pts, 0.1, Slot(), "dense");
  ASSERT_EQ(traj.states.size(), 51u);
  EXPECT_NEAR(traj.states[10].pose.x, 0.2, 1e-12);
  EXPECT_EQ(traj.states.back().pose.x, pts.back().x);
}

TEST(IngestTest, OutOfWorkspaceIsClamped) {
  Trajectory t = IngestHumanDemo(
      {{-0.5, 0.5, 0.5, 0.0}, {1.5, 0.5, 1.2, 0.2}}, 0.1, Slot(), "c");
  ASSERT_EQ(t.states.size(), 3u);
  EXPECT_EQ(t.states[0].pose.x, 0.0);
  EXPECT_EQ(t.states[1].pose.x, 0.5);
  EXPECT_EQ(t.states[2].pose.x, 1.0);
  EXPECT_EQ(t.states[2].pose.theta, 1.0);
}

TEST(IngestTest, RejectsBadStrokes) {
  EXPECT_THROW(IngestHumanDemo({{0.1, 0.1, 0.5, 0.0}}, 0.1, Slot(), "x"),
               std::invalid_argument);
  EXPECT_THROW(IngestHumanDemo({}, 0.1, Slot(), "x"), std::invalid_argument);
  EXPECT_THROW(IngestHumanDemo({{0.1, 0.1, 0.5, 0.2}, {0.2, 0.1, 0.5, 0.2}},
                               0.1, Slot(), "x"),
               std::invalid_argument);
  EXPECT_THROW(IngestHumanDemo({{NAN, 0.1, 0.5, 0.0}, {0.2, 0.1, 0.5, 0.1}},
                               0.1, Slot(), "x"),
               std::invalid_argument);
}

}  // namespace
}  // namespace fabco
