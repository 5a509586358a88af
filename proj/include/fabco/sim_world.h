#ifndef FABCO_SIM_WORLD_H_
#define FABCO_SIM_WORLD_H_

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fabco {

inline constexpr int kPoseDim = 3;
inline constexpr int kActionDim = 3;

// Planar end-effector pose. Every component is normalized to [0, 1]; theta
// maps linearly onto the configured angle range.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : theta); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : theta); }
  bool operator==(const Pose&) const = default;
};

// Velocity command as a fraction of each component's max speed, in [-1, 1].
struct Action {
  double vx = 0.0;
  double vy = 0.0;
  double vtheta = 0.0;

  double operator[](int i) const {
    return i == 0 ? vx : (i == 1 ? vy : vtheta);
  }
  double& operator[](int i) { return i == 0 ? vx : (i == 1 ? vy : vtheta); }
  bool operator==(const Action&) const = default;
};

// Insertion slot seen by the robot; fixed for an episode.
struct EnvObservation {
  Pose slot_pose;
  double slot_half_width = 0.03;

  bool operator==(const EnvObservation&) const = default;
};

struct State {
  Pose pose;
  EnvObservation obs;

  bool operator==(const State&) const = default;
};

enum class TrajectorySource {
  kRobotRandom,
  kHumanDemo,
  kSyntheticDemo,
  kPolicyRollout,
};

std::string_view ToString(TrajectorySource source);
TrajectorySource TrajectorySourceFromString(std::string_view name);

struct Trajectory {
  std::string id;
  TrajectorySource source = TrajectorySource::kRobotRandom;
  std::vector<State> states;
  // present for robot-generated data; size() == states.size() - 1
  std::optional<std::vector<Action>> actions;
  double dt = 0.1;

  bool operator==(const Trajectory&) const = default;
};

struct RobotLimits {
  // normalized units per second
  std::array<double, 3> max_speed = {0.5, 0.5, 0.15};
  // normalized units per second^2
  std::array<double, 3> max_accel = {5.0, 5.0, 1.5};

  // per-component displacement bound for one step of length dt
  std::array<double, 3> MaxStep(double dt) const {
    return {max_speed[0] * dt, max_speed[1] * dt, max_speed[2] * dt};
  }
  void Validate() const;
};

// Geometry of the insertion task: where slots and start poses are drawn from
// and what counts as a successful insertion.
struct TaskSpec {
  // slot region
  std::array<double, 2> slot_x_range = {0.35, 0.65};
  std::array<double, 2> slot_y_range = {0.75, 0.85};
  std::array<double, 2> slot_theta_range = {0.30, 0.70};
  double slot_half_width = 0.03;

  // start region; theta is drawn as nominal +- spread
  std::array<double, 2> start_x_range = {0.15, 0.85};
  std::array<double, 2> start_y_range = {0.05, 0.20};
  double start_theta_nominal = 0.5;
  double start_theta_spread = 0.30;

  // success predicate
  double tol_pos = 0.025;
  double tol_theta = 0.04;
  // the entry line sits this far below the slot along y
  double entry_depth = 0.12;

  void Validate() const;
};

// Ground-truth single step: clamp_workspace(pose + clip(action) * max_speed * dt).
Pose Step(const Pose& pose, const Action& action, const RobotLimits& limits,
          double dt);

Action ClipAction(const Action& action);
Pose ClampWorkspace(const Pose& pose);

// Episode runner. Carries the previously applied command so that
// acceleration limits can be enforced between steps.
class Simulator {
 public:
  Simulator(const Pose& initial, const RobotLimits& limits, double dt);

  // Applies `command` after speed and acceleration clipping. Returns the
  // command that was actually applied.
  Action Advance(const Action& command);

  const Pose& pose() const { return pose_; }
  const Action& last_command() const { return last_command_; }
  double dt() const { return dt_; }

 private:
  Pose pose_;
  Action last_command_;
  RobotLimits limits_;
  double dt_;
};

// Proportional waypoint tracker:
// a_i = clip(gain * (waypoint_i - current_i) / (max_speed_i * dt), -1, 1).
Action Track(const Pose& current, const Pose& waypoint, double gain,
             const RobotLimits& limits, double dt);

struct TrackingOptions {
  double dt = 0.1;
  // tracking gain is drawn uniformly from this range per trajectory
  std::array<double, 2> gain_range = {0.25, 1.0};
};

// Samples n_waypoints uniform poses, starts at the first one and tracks the
// remaining ones in order, each for an equal share of the step budget.
Trajectory GenerateRandomTrajectory(std::uint64_t seed, int n_waypoints,
                                    int steps, const RobotLimits& limits,
                                    const TrackingOptions& options = {});

EnvObservation SampleSlot(std::mt19937_64& rng, const TaskSpec& task);
Pose SampleStartPose(std::mt19937_64& rng, const TaskSpec& task);
State SampleInitialState(std::mt19937_64& rng, const TaskSpec& task);

// Pose the demonstrator and scripted controllers aim for before inserting.
Pose PreInsertionPose(const EnvObservation& obs, const TaskSpec& task);

// True iff some state t is within tol_pos (euclidean, xy) and tol_theta of the
// slot, and at some earlier state s < t the trajectory crossed the entry line
// upward while inside the slot opening and aligned in theta. Inclusive
// comparisons throughout.
bool TaskSuccess(const Trajectory& trajectory, double tol_pos,
                 double tol_theta, double entry_depth);
bool TaskSuccess(const Trajectory& trajectory, const TaskSpec& task);

// Incremental form of TaskSuccess used by closed-loop rollouts.
class SuccessMonitor {
 public:
  SuccessMonitor(double tol_pos, double tol_theta, double entry_depth);
  explicit SuccessMonitor(const TaskSpec& task);

  // Feed states in order; returns true once the predicate is satisfied.
  bool Observe(const State& state);
  bool succeeded() const { return succeeded_; }

 private:
  double tol_pos_;
  double tol_theta_;
  double entry_depth_;
  std::optional<State> previous_;
  bool entered_ = false;
  bool succeeded_ = false;
};

// Derives an independent child seed (splitmix64 finalizer).
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

// Largest per-component |p_{t+1} - p_t| over the trajectory.
std::array<double, 3> MaxDisplacement(const Trajectory& trajectory);

}  // namespace fabco

#endif  // FABCO_SIM_WORLD_H_
