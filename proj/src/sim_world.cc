#include "fabco/sim_world.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fabco {
namespace {

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool WithinSlot(const Pose& pose, const Pose& slot, double tol_pos,
                double tol_theta) {
  double dx = pose.x - slot.x;
  double dy = pose.y - slot.y;
  return std::sqrt(dx * dx + dy * dy) <= tol_pos &&
         std::abs(pose.theta - slot.theta) <= tol_theta;
}

}  // namespace

std::string_view ToString(TrajectorySource source) {
  switch (source) {
    case TrajectorySource::kRobotRandom:
      return "robot_random";
    case TrajectorySource::kHumanDemo:
      return "human_demo";
    case TrajectorySource::kSyntheticDemo:
      return "synthetic_demo";
    case TrajectorySource::kPolicyRollout:
      return "policy_rollout";
  }
  return "unknown";
}

TrajectorySource TrajectorySourceFromString(std::string_view name) {
  if (name == "robot_random") return TrajectorySource::kRobotRandom;
  if (name == "human_demo") return TrajectorySource::kHumanDemo;
  if (name == "synthetic_demo") return TrajectorySource::kSyntheticDemo;
  if (name == "policy_rollout") return TrajectorySource::kPolicyRollout;
  throw std::invalid_argument("unknown trajectory source: " +
                              std::string(name));
}

void RobotLimits::Validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(max_speed[i] > 0.0) || !(max_accel[i] > 0.0)) {
      throw std::invalid_argument("robot limits must be strictly positive");
    }
  }
}

void TaskSpec::Validate() const {
  auto check_range = [](const std::array<double, 2>& r, const char* name) {
    if (!(r[0] <= r[1]) || r[0] < 0.0 || r[1] > 1.0) {
      throw std::invalid_argument(std::string("invalid task range: ") + name);
    }
  };
  check_range(slot_x_range, "slot_x_range");
  check_range(slot_y_range, "slot_y_range");
  check_range(slot_theta_range, "slot_theta_range");
  check_range(start_x_range, "start_x_range");
  check_range(start_y_range, "start_y_range");
  if (!(slot_half_width > 0.0) || !(tol_pos > 0.0) || !(tol_theta > 0.0) ||
      !(entry_depth > 0.0)) {
    throw std::invalid_argument("task tolerances must be positive");
  }
  // slot must keep a margin of slot_half_width inside the workspace
  if (slot_x_range[0] < slot_half_width ||
      slot_x_range[1] > 1.0 - slot_half_width ||
      slot_y_range[0] < slot_half_width ||
      slot_y_range[1] > 1.0 - slot_half_width) {
    throw std::invalid_argument("slot region violates workspace margin");
  }
  if (start_y_range[1] >= slot_y_range[0] - entry_depth) {
    throw std::invalid_argument("start region must lie below the entry line");
  }
}

Action ClipAction(const Action& action) {
  Action out;
  for (int i = 0; i < kActionDim; ++i) {
    out[i] = std::clamp(action[i], -1.0, 1.0);
  }
  return out;
}

Pose ClampWorkspace(const Pose& pose) {
  Pose out;
  for (int i = 0; i < kPoseDim; ++i) out[i] = std::clamp(pose[i], 0.0, 1.0);
  return out;
}

Pose Step(const Pose& pose, const Action& action, const RobotLimits& limits,
          double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("Step: dt must be positive");
  Action clipped = ClipAction(action);
  Pose next;
  for (int i = 0; i < kPoseDim; ++i) {
    next[i] = pose[i] + clipped[i] * limits.max_speed[i] * dt;
  }
  return ClampWorkspace(next);
}

Simulator::Simulator(const Pose& initial, const RobotLimits& limits, double dt)
    : pose_(ClampWorkspace(initial)), limits_(limits), dt_(dt) {
  limits_.Validate();
  if (!(dt > 0.0)) throw std::invalid_argument("Simulator: dt must be positive");
}

Action Simulator::Advance(const Action& command) {
  Action applied = ClipAction(command);
  for (int i = 0; i < kActionDim; ++i) {
    // largest change of the normalized command allowed in one step
    double max_delta = limits_.max_accel[i] * dt_ / limits_.max_speed[i];
    applied[i] = std::clamp(applied[i], last_command_[i] - max_delta,
                            last_command_[i] + max_delta);
  }
  pose_ = Step(pose_, applied, limits_, dt_);
  last_command_ = applied;
  return applied;
}

Action Track(const Pose& current, const Pose& waypoint, double gain,
             const RobotLimits& limits, double dt) {
  if (!(gain > 0.0)) throw std::invalid_argument("Track: gain must be positive");
  Action action;
  for (int i = 0; i < kActionDim; ++i) {
    double error = waypoint[i] - current[i];
    action[i] =
        std::clamp(gain * error / (limits.max_speed[i] * dt), -1.0, 1.0);
  }
  return action;
}

Trajectory GenerateRandomTrajectory(std::uint64_t seed, int n_waypoints,
                                    int steps, const RobotLimits& limits,
                                    const TrackingOptions& options) {
  if (n_waypoints < 2) {
    throw std::invalid_argument("GenerateRandomTrajectory: n_waypoints < 2");
  }
  if (steps < n_waypoints) {
    throw std::invalid_argument("GenerateRandomTrajectory: steps < n_waypoints");
  }
  std::mt19937_64 rng(seed);
  std::vector<Pose> waypoints(n_waypoints);
  for (Pose& wp : waypoints) {
    wp = {Uniform(rng, 0.0, 1.0), Uniform(rng, 0.0, 1.0),
          Uniform(rng, 0.0, 1.0)};
  }
  double gain = Uniform(rng, options.gain_range[0], options.gain_range[1]);
  // robot data carries a nominal slot so states are complete
  TaskSpec task;
  EnvObservation obs = SampleSlot(rng, task);

  Trajectory traj;
  traj.id = "robot-" + std::to_string(seed);
  traj.source = TrajectorySource::kRobotRandom;
  traj.dt = options.dt;
  traj.states.reserve(steps);
  traj.actions.emplace();
  traj.actions->reserve(steps - 1);

  Simulator sim(waypoints[0], limits, options.dt);
  traj.states.push_back({sim.pose(), obs});
  const int transitions = steps - 1;
  const int segments = n_waypoints - 1;
  for (int t = 0; t < transitions; ++t) {
    int target = 1 + std::min(segments - 1, t * segments / transitions);
    Action command =
        Track(sim.pose(), waypoints[target], gain, limits, options.dt);
    traj.actions->push_back(sim.Advance(command));
    traj.states.push_back({sim.pose(), obs});
  }
  return traj;
}

EnvObservation SampleSlot(std::mt19937_64& rng, const TaskSpec& task) {
  EnvObservation obs;
  obs.slot_pose.x = Uniform(rng, task.slot_x_range[0], task.slot_x_range[1]);
  obs.slot_pose.y = Uniform(rng, task.slot_y_range[0], task.slot_y_range[1]);
  obs.slot_pose.theta =
      Uniform(rng, task.slot_theta_range[0], task.slot_theta_range[1]);
  obs.slot_half_width = task.slot_half_width;
  return obs;
}

Pose SampleStartPose(std::mt19937_64& rng, const TaskSpec& task) {
  Pose pose;
  pose.x = Uniform(rng, task.start_x_range[0], task.start_x_range[1]);
  pose.y = Uniform(rng, task.start_y_range[0], task.start_y_range[1]);
  pose.theta = Uniform(rng, task.start_theta_nominal - task.start_theta_spread,
                       task.start_theta_nominal + task.start_theta_spread);
  return ClampWorkspace(pose);
}

State SampleInitialState(std::mt19937_64& rng, const TaskSpec& task) {
  State state;
  state.obs = SampleSlot(rng, task);
  state.pose = SampleStartPose(rng, task);
  return state;
}

Pose PreInsertionPose(const EnvObservation& obs, const TaskSpec& task) {
  // a little below the entry line so the last approach step crosses it aligned
  Pose pre = obs.slot_pose;
  pre.y = obs.slot_pose.y - task.entry_depth - 0.05;
  return ClampWorkspace(pre);
}

SuccessMonitor::SuccessMonitor(double tol_pos, double tol_theta,
                               double entry_depth)
    : tol_pos_(tol_pos), tol_theta_(tol_theta), entry_depth_(entry_depth) {}

SuccessMonitor::SuccessMonitor(const TaskSpec& task)
    : SuccessMonitor(task.tol_pos, task.tol_theta, task.entry_depth) {}

bool SuccessMonitor::Observe(const State& state) {
  if (succeeded_) return true;
  const Pose& slot = state.obs.slot_pose;
  if (entered_ && WithinSlot(state.pose, slot, tol_pos_, tol_theta_)) {
    succeeded_ = true;
    return true;
  }
  if (previous_) {
    double entry_y = slot.y - entry_depth_;
    bool crossed = previous_->pose.y < entry_y && state.pose.y >= entry_y;
    bool aligned =
        std::abs(state.pose.x - slot.x) <= state.obs.slot_half_width &&
        std::abs(state.pose.theta - slot.theta) <= tol_theta_;
    if (crossed && aligned) entered_ = true;
  }
  previous_ = state;
  return false;
}

bool TaskSuccess(const Trajectory& trajectory, double tol_pos,
                 double tol_theta, double entry_depth) {
  if (trajectory.states.empty()) {
    throw std::invalid_argument("TaskSuccess: empty trajectory");
  }
  SuccessMonitor monitor(tol_pos, tol_theta, entry_depth);
  for (const State& s : trajectory.states) {
    if (monitor.Observe(s)) return true;
  }
  return false;
}

bool TaskSuccess(const Trajectory& trajectory, const TaskSpec& task) {
  return TaskSuccess(trajectory, task.tol_pos, task.tol_theta,
                     task.entry_depth);
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::array<double, 3> MaxDisplacement(const Trajectory& trajectory) {
  std::array<double, 3> out = {0.0, 0.0, 0.0};
  for (size_t t = 0; t + 1 < trajectory.states.size(); ++t) {
    for (int i = 0; i < kPoseDim; ++i) {
      out[i] = std::max(out[i], std::abs(trajectory.states[t + 1].pose[i] -
                                         trajectory.states[t].pose[i]));
    }
  }
  return out;
}

}  // namespace fabco
