#ifndef FABCO_DEMONSTRATORS_H_
#define FABCO_DEMONSTRATORS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabco/dynamics.h"
#include "fabco/feasibility.h"
#include "fabco/sim_world.h"

namespace fabco {

// Headless stand-in for a human demonstrator.
struct SynthDemoConfig {
  // demonstrated speed as a multiple of the robot's max speed; > 1 produces
  // segments the robot cannot follow
  double speed_multiplier = 1.0;
  double jitter_std = 0.0;
  // fraction of the gap to feasible speed closed after each demonstration,
  // scaled by (1 - mean feasibility); only used with feedback
  double adaptation_rate = 0.0;
  bool feedback_enabled = false;
  // stationary states recorded after arriving at the slot
  int hold_steps = 3;
  std::uint64_t rng_seed = 0;

  void Validate() const;
};

// Everything a demonstration needs to know about the robot and task.
struct DemoEnvironment {
  RobotLimits limits;
  TaskSpec task;
  double dt = 0.1;
  int max_steps = 50;
};

// Observation-only path from `initial` to the pre-insertion pose and then
// into the slot at speed_multiplier x robot speed, components moving in
// proportion. Recording stops hold_steps after reaching the slot or after
// `steps` states. Jitter is added to recorded poses only.
Trajectory SynthDemo(const SynthDemoConfig& cfg, const State& initial,
                     int steps, const DemoEnvironment& env, std::uint64_t seed);

struct DemoSession {
  std::string demonstrator_id;
  bool feedback_enabled = false;
  std::vector<Trajectory> demos;
  // present iff feedback_enabled: what the demonstrator was shown
  std::optional<std::vector<FeasibilityProfile>> profiles;
  // speed multiplier used for each demonstration
  std::vector<double> speed_history;
};

// Runs n_demos demonstrations in sequence. With feedback, after every demo
// speed <- speed - adaptation_rate * (speed - 1) * (1 - mean_w).
DemoSession RunSession(const SynthDemoConfig& cfg, int n_demos,
                       const DynModel& idm, const DynModel& fdm,
                       double sigma_w, const DemoEnvironment& env);

// Per-demonstration mean feasibility. Uses the stored profiles when the
// session has them, otherwise scores the demos with the given models.
std::vector<double> SessionMeanFeasibility(const DemoSession& session,
                                           const DynModel& idm,
                                           const DynModel& fdm,
                                           double sigma_w);

struct RawPoint {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.5;
  double t = 0.0;  // seconds
};

// Resamples a timestamped polyline onto a uniform grid of
// round(duration / dt) intervals (endpoints kept exactly), interpolating
// linearly, and clamps into the workspace. Throws std::invalid_argument on
// fewer than 2 points or non-increasing timestamps.
Trajectory IngestHumanDemo(const std::vector<RawPoint>& points, double dt,
                           const EnvObservation& obs, const std::string& id);

// Directory layout: demos.jsonl, profiles.json (feedback arm only),
// manifest.json.
void SaveSession(const DemoSession& session, const std::filesystem::path& dir);
DemoSession LoadSession(const std::filesystem::path& dir);

}  // namespace fabco

#endif  // FABCO_DEMONSTRATORS_H_
