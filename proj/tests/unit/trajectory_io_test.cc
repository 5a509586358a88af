#include "fabco/trajectory_io.h"

#include <fstream>
#include <limits>
#include <stdexcept>

#include <gtest/gtest.h>

#include "test_models.h"

namespace fabco {
namespace {

using testing::TempDir;

TEST(TrajectoryJsonTest, RobotTrajectoryRoundTripsExactly) {
  Trajectory t = GenerateRandomTrajectory(4, 5, 50, RobotLimits{});
  EXPECT_EQ(TrajectoryFromJson(TrajectoryToJson(t)), t);
}

TEST(TrajectoryJsonTest, ObservationOnlyHasNoActions) {
  Trajectory t = GenerateRandomTrajectory(4, 5, 20, RobotLimits{});
  t.actions.reset();
  t.source = TrajectorySource::kHumanDemo;
  Trajectory back = TrajectoryFromJson(TrajectoryToJson(t));
  EXPECT_FALSE(back.actions.has_value());
  EXPECT_EQ(back, t);
}

TEST(TrajectoryJsonlTest, FileRoundTripKeepsOrder) {
  TempDir dir;
  std::vector<Trajectory> in;
  for (int i = 0; i < 5; ++i) {
    in.push_back(GenerateRandomTrajectory(i, 3, 10, RobotLimits{}));
  }
  WriteTrajectoriesJsonl(dir.path() / "t.jsonl", in);
  EXPECT_EQ(ReadTrajectoriesJsonl(dir.path() / "t.jsonl"), in);
}

TEST(TrajectoryJsonlTest, MissingFileThrows) {
  TempDir dir;
  EXPECT_ANY_THROW(ReadTrajectoriesJsonl(dir.path() / "absent.jsonl"));
}

TEST(ValidateTrajectoryTest, RejectsStructuralProblems) {
  Trajectory good = GenerateRandomTrajectory(1, 3, 10, RobotLimits{});
  EXPECT_NO_THROW(ValidateTrajectory(good));

  Trajectory short_one = good;
  short_one.states.resize(1);
  short_one.actions->clear();
  EXPECT_THROW(ValidateTrajectory(short_one), std::invalid_argument);

  Trajectory bad_actions = good;
  bad_actions.actions->pop_back();
  EXPECT_THROW(ValidateTrajectory(bad_actions), std::invalid_argument);

  Trajectory moving_slot = good;
  moving_slot.states[3].obs.slot_pose.x += 0.01;
  EXPECT_THROW(ValidateTrajectory(moving_slot), std::invalid_argument);

  Trajectory nan_pose = good;
  nan_pose.states[2].pose.y = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ValidateTrajectory(nan_pose), std::invalid_argument);
}

TEST(Fnv1aTest, KnownVectors) {
  EXPECT_EQ(Fnv1aHex(""), "cbf29ce484222325");
  EXPECT_EQ(Fnv1aHex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(Fnv1aHex("foobar"), "85944171f73967e8");
}

TEST(JsonFileTest, RoundTrip) {
  TempDir dir;
  nlohmann::json j = {{"a", 1}, {"b", {1.5, 2.5}}};
  WriteJsonFile(dir.path() / "x.json", j);
  EXPECT_EQ(ReadJsonFile(dir.path() / "x.json"), j);
}

}  // namespace
}  // namespace fabco
