#include "fabco/dynamics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_models.h"

namespace fabco {
namespace {

std::vector<Trajectory> RobotData(int n, int steps, std::uint64_t first = 0) {
  std::vector<Trajectory> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(GenerateRandomTrajectory(first + i, 5, steps, RobotLimits{}));
  }
  return out;
}

TEST(BuildDatasetTest, CountsEveryTransition) {
  DynDataset data = BuildDataset(RobotData(2500, 50));
  EXPECT_EQ(data.transitions.size(), 122500u);
  EXPECT_EQ(data.provenance.size(), 2500u);
  EXPECT_EQ(data.provenance.front(), "robot-0");
}

TEST(BuildDatasetTest, TwoStatesGiveOneTransition) {
  auto robot = RobotData(1, 10);
  robot[0].states.resize(2);
  robot[0].actions->resize(1);
  DynDataset data = BuildDataset(robot);
  ASSERT_EQ(data.transitions.size(), 1u);
  const Transition& tr = data.transitions[0];
  EXPECT_EQ(tr.prev, tr.pose);
}

TEST(BuildDatasetTest, KeepsPreviousPose) {
  auto robot = RobotData(1, 10);
  DynDataset data = BuildDataset(robot);
  EXPECT_EQ(data.transitions[4].prev, robot[0].states[3].pose);
  EXPECT_EQ(data.transitions[4].next, robot[0].states[5].pose);
  EXPECT_EQ(data.transitions[4].action, (*robot[0].actions)[4]);
}

TEST(BuildDatasetTest, EmptyInputThrows) {
  EXPECT_THROW(BuildDataset({}), std::invalid_argument);
}

TEST(BuildDatasetTest, MissingActionsNamesTheTrajectory) {
  auto robot = RobotData(3, 10);
  robot[1].actions.reset();
  try {
    BuildDataset(robot);
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("robot-1"), std::string::npos);
  }
}

TEST(BuildDatasetTest, RejectsDemonstrationData) {
  auto robot = RobotData(1, 10);
  robot[0].source = TrajectorySource::kSyntheticDemo;
  EXPECT_THROW(BuildDataset(robot), std::invalid_argument);
}

TEST(SpeedAuditTest, RobotDataIsWithinBound) {
  SpeedAudit audit = AuditSpeedBound(BuildDataset(RobotData(50, 50)),
                                     RobotLimits{});
  EXPECT_TRUE(audit.ok);
  EXPECT_LE(audit.worst_ratio, 1.0 + 1e-9);
}

TEST(SpeedAuditTest, FlagsFastTransitions) {
  auto robot = RobotData(1, 10);
  const double x4 = robot[0].states[4].pose.x;
  robot[0].states[5].pose.x = x4 < 0.5 ? x4 + 0.2 : x4 - 0.2;
  SpeedAudit audit = AuditSpeedBound(BuildDataset(robot), RobotLimits{});
  EXPECT_FALSE(audit.ok);
  EXPECT_GE(audit.violations, 1);
}

TEST(DynModelTest, IdmMapsIdentityTransitionToNearZero) {
  const DynModel& idm = testing::SharedDynModels().idm;
  for (Pose p : {Pose{0.5, 0.5, 0.5}, Pose{0.3, 0.7, 0.4}, Pose{0.6, 0.2, 0.6}}) {
    Action a = idm.PredictAction(p, p);
    double inf = std::max({std::abs(a.vx), std::abs(a.vy), std::abs(a.vtheta)});
    EXPECT_LT(inf, 0.05) << p.x << "," << p.y << "," << p.theta;
  }
}

TEST(DynModelTest, FdmZeroActionStaysPut) {
  const DynModel& fdm = testing::SharedDynModels().fdm;
  for (Pose p : {Pose{0.5, 0.5, 0.5}, Pose{0.3, 0.7, 0.4}, Pose{0.6, 0.2, 0.6}}) {
    Pose n = fdm.PredictPose(p, Action{});
    EXPECT_LT(std::abs(n.x - p.x) + std::abs(n.y - p.y) +
                  std::abs(n.theta - p.theta),
              0.01);
  }
}

TEST(DynModelTest, ModelsAgreeWithSimulatorOnHeldOutData) {
  const DynModels& dyn = testing::SharedDynModels();
  RobotLimits limits;
  DynDataset held_out = BuildDataset(RobotData(40, 50, 1'000'000));
  std::vector<double> idm_err, fdm_err;
  for (const Transition& tr : held_out.transitions) {
    Action a = dyn.idm.PredictAction(tr.pose, tr.next);
    Pose n = dyn.fdm.PredictPose(tr.pose, tr.action);
    idm_err.push_back(std::abs(a.vx - tr.action.vx) +
                      std::abs(a.vy - tr.action.vy) +
                      std::abs(a.vtheta - tr.action.vtheta));
    fdm_err.push_back(std::abs(n.x - tr.next.x) + std::abs(n.y - tr.next.y) +
                      std::abs(n.theta - tr.next.theta));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  // the small test models are looser than the full-size ones
  EXPECT_LT(median(idm_err), 0.2);
  EXPECT_LT(median(fdm_err), 0.01);
}

TEST(DynModelTest, BatchedPredictionsMatchSingle) {
  const DynModels& dyn = testing::SharedDynModels();
  Trajectory t = GenerateRandomTrajectory(99, 4, 12, RobotLimits{});
  std::vector<Pose> path;
  for (const State& s : t.states) path.push_back(s.pose);
  std::vector<Pose> poses(path.begin(), path.end() - 1);
  std::vector<Pose> nexts(path.begin() + 1, path.end());
  std::vector<Action> batch = dyn.idm.PredictActions(poses, nexts);
  std::vector<Pose> fdm_batch = dyn.fdm.PredictPoses(poses, batch);
  for (size_t k = 0; k < poses.size(); ++k) {
    Action single = dyn.idm.PredictAction(poses[k], nexts[k]);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(batch[k][i], single[i], 1e-12);
    Pose p = dyn.fdm.PredictPose(poses[k], batch[k]);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(fdm_batch[k][i], p[i], 1e-12);
  }
}

TEST(DynModelTest, WrongKindThrows) {
  const DynModels& dyn = testing::SharedDynModels();
  EXPECT_THROW(dyn.idm.PredictPose({}, {}), std::logic_error);
  EXPECT_THROW(dyn.fdm.PredictAction({}, {}), std::logic_error);
}

TEST(DynModelTest, JsonRoundTripPredictsIdentically) {
  const DynModel& idm = testing::SharedDynModels().idm;
  DynModel back = DynModel::FromJson(idm.ToJson());
  Pose p{0.4, 0.4, 0.5}, n{0.42, 0.39, 0.505};
  EXPECT_EQ(back.PredictAction(p, n), idm.PredictAction(p, n));
  EXPECT_EQ(back.kind(), DynKind::kIdm);
}

TEST(TrainDynTest, SameSeedSameCheckpoint) {
  DynDataset data = BuildDataset(RobotData(20, 20));
  nn::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.rng_seed = 5;
  DynModelOptions small;
  small.hidden = {16};
  DynModel a = TrainIdm(data, cfg, small);
  DynModel b = TrainIdm(data, cfg, small);
  EXPECT_EQ(a.ToJson().dump(), b.ToJson().dump());
  DynModel f1 = TrainFdm(data, cfg, small);
  DynModel f2 = TrainFdm(data, cfg, small);
  EXPECT_EQ(f1.ToJson().dump(), f2.ToJson().dump());
}

TEST(TrainDynTest, ThreePoseContextTrains) {
  DynDataset data = BuildDataset(RobotData(20, 20));
  nn::TrainConfig cfg;
  cfg.epochs = 2;
  DynModelOptions opts;
  opts.hidden = {16};
  opts.idm_context = IdmContext::kThreePose;
  DynModel idm = TrainIdm(data, cfg, opts);
  EXPECT_EQ(idm.idm_context(), IdmContext::kThreePose);
  EXPECT_EQ(idm.checkpoint().spec.input_dim(), 9);
  Action a = idm.PredictAction({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5},
                               Pose{0.5, 0.5, 0.5});
  EXPECT_LE(std::abs(a.vx), 1.0);
}

}  // namespace
}  // namespace fabco
