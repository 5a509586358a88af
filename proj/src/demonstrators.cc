#include "fabco/demonstrators.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fabco/trajectory_io.h"

namespace fabco {
namespace {

// One step of a motion where every component arrives at `target` together
// and no component moves more than max_step[i]. Returns true on arrival.
bool MoveToward(Pose& pose, const Pose& target,
                const std::array<double, 3>& max_step) {
  double steps_needed = 0.0;
  for (int i = 0; i < kPoseDim; ++i) {
    steps_needed =
        std::max(steps_needed, std::abs(target[i] - pose[i]) / max_step[i]);
  }
  if (steps_needed <= 1.0) {
    pose = target;
    return true;
  }
  for (int i = 0; i < kPoseDim; ++i) {
    pose[i] += (target[i] - pose[i]) / steps_needed;
  }
  return false;
}

}  // namespace

void SynthDemoConfig::Validate() const {
  if (!(speed_multiplier >= 0.0) || !std::isfinite(speed_multiplier)) {
    throw std::invalid_argument("speed_multiplier must be finite and >= 0");
  }
  if (!(jitter_std >= 0.0)) throw std::invalid_argument("jitter_std must be >= 0");
  if (hold_steps < 0) throw std::invalid_argument("hold_steps must be >= 0");
  if (!(adaptation_rate >= 0.0 && adaptation_rate <= 1.0)) {
    throw std::invalid_argument("adaptation_rate must lie in [0, 1]");
  }
}

Trajectory SynthDemo(const SynthDemoConfig& cfg, const State& initial,
                     int steps, const DemoEnvironment& env,
                     std::uint64_t seed) {
  cfg.Validate();
  if (steps < 2) throw std::invalid_argument("SynthDemo: steps < 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  Trajectory traj;
  traj.id = "demo-" + std::to_string(seed);
  traj.source = TrajectorySource::kSyntheticDemo;
  traj.dt = env.dt;

  std::array<double, 3> max_step = env.limits.MaxStep(env.dt);
  for (double& m : max_step) m *= cfg.speed_multiplier;

  const Pose waypoints[2] = {PreInsertionPose(initial.obs, env.task),
                             initial.obs.slot_pose};
  auto record = [&](const Pose& clean) {
    Pose p = clean;
    if (cfg.jitter_std > 0.0) {
      for (int i = 0; i < kPoseDim; ++i) p[i] += cfg.jitter_std * noise(rng);
    }
    traj.states.push_back({ClampWorkspace(p), initial.obs});
  };

  Pose pose = ClampWorkspace(initial.pose);
  record(pose);
  int leg = 0;
  int held = 0;
  while (static_cast<int>(traj.states.size()) < steps) {
    if (leg < 2 && cfg.speed_multiplier > 0.0 &&
        MoveToward(pose, waypoints[leg], max_step)) {
      ++leg;
    } else if (leg == 2) {
      ++held;
    }
    record(pose);
    if (leg == 2 && held >= cfg.hold_steps) break;
  }
  return traj;
}

DemoSession RunSession(const SynthDemoConfig& cfg, int n_demos,
                       const DynModel& idm, const DynModel& fdm,
                       double sigma_w, const DemoEnvironment& env) {
  cfg.Validate();
  if (n_demos < 1) throw std::invalid_argument("RunSession: n_demos < 1");
  DemoSession session;
  session.demonstrator_id = "synthetic-" + std::to_string(cfg.rng_seed);
  session.feedback_enabled = cfg.feedback_enabled;
  if (cfg.feedback_enabled) session.profiles.emplace();

  std::mt19937_64 rng(cfg.rng_seed);
  SynthDemoConfig current = cfg;
  for (int m = 0; m < n_demos; ++m) {
    State initial = SampleInitialState(rng, env.task);
    Trajectory demo = SynthDemo(current, initial, env.max_steps, env,
                                MixSeed(cfg.rng_seed, m));
    demo.id = session.demonstrator_id + "-" + std::to_string(m);
    session.speed_history.push_back(current.speed_multiplier);
    if (cfg.feedback_enabled) {
      FeasibilityProfile profile =
          ComputeFeasibilityProfile(fdm, idm, demo, sigma_w);
      // the demonstrator slows down in proportion to how infeasible the
      // last demonstration looked
      double s = current.speed_multiplier;
      current.speed_multiplier =
          s - cfg.adaptation_rate * (s - 1.0) * (1.0 - profile.mean);
      session.profiles->push_back(std::move(profile));
    }
    session.demos.push_back(std::move(demo));
  }
  return session;
}

std::vector<double> SessionMeanFeasibility(const DemoSession& session,
                                           const DynModel& idm,
                                           const DynModel& fdm,
                                           double sigma_w) {
  std::vector<double> means;
  means.reserve(session.demos.size());
  if (session.profiles &&
      session.profiles->size() == session.demos.size() &&
      std::all_of(session.profiles->begin(), session.profiles->end(),
                  [&](const FeasibilityProfile& p) {
                    return p.sigma_w == sigma_w;
                  })) {
    for (const FeasibilityProfile& p : *session.profiles) {
      means.push_back(p.mean);
    }
    return means;
  }
  for (const Trajectory& demo : session.demos) {
    means.push_back(ComputeFeasibilityProfile(fdm, idm, demo, sigma_w).mean);
  }
  return means;
}

Trajectory IngestHumanDemo(const std::vector<RawPoint>& points, double dt,
                           const EnvObservation& obs, const std::string& id) {
  if (points.size() < 2) {
    throw std::invalid_argument("demonstration needs at least 2 points");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  for (size_t k = 0; k < points.size(); ++k) {
    const RawPoint& p = points[k];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) ||
        !std::isfinite(p.theta) || !std::isfinite(p.t)) {
      throw std::invalid_argument("non-finite value at point " +
                                  std::to_string(k));
    }
    if (k > 0 && !(p.t > points[k - 1].t)) {
      throw std::invalid_argument("timestamps must be strictly increasing at " +
                                  std::to_string(k));
    }
  }
  const double t0 = points.front().t;
  const double duration = points.back().t - t0;
  const int intervals =
      std::max(1, static_cast<int>(std::lround(duration / dt)));

  Trajectory traj;
  traj.id = id;
  traj.source = TrajectorySource::kHumanDemo;
  traj.dt = dt;
  size_t seg = 0;
  for (int k = 0; k <= intervals; ++k) {
    double t = k == intervals ? points.back().t
                              : t0 + duration * k / intervals;
    while (seg + 2 < points.size() && points[seg + 1].t < t) ++seg;
    const RawPoint& a = points[seg];
    const RawPoint& b = points[seg + 1];
    double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    Pose pose{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y),
              a.theta + u * (b.theta - a.theta)};
    traj.states.push_back({ClampWorkspace(pose), obs});
  }
  return traj;
}

void SaveSession(const DemoSession& session, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteTrajectoriesJsonl(dir / "demos.jsonl", session.demos);
  if (session.profiles) {
    nlohmann::json profiles = nlohmann::json::array();
    for (const FeasibilityProfile& p : *session.profiles) {
      profiles.push_back(ProfileToJson(p));
    }
    WriteJsonFile(dir / "profiles.json", profiles);
  }
  nlohmann::json manifest = {
      {"demonstrator_id", session.demonstrator_id},
      {"feedback_enabled", session.feedback_enabled},
      {"n_demos", session.demos.size()},
      {"speed_history", session.speed_history},
      {"demos_sha", Fnv1aHex(ReadTextFile(dir / "demos.jsonl"))},
  };
  WriteJsonFile(dir / "manifest.json", manifest);
}

DemoSession LoadSession(const std::filesystem::path& dir) {
  nlohmann::json manifest = ReadJsonFile(dir / "manifest.json");
  DemoSession session;
  session.demonstrator_id = manifest.at("demonstrator_id").get<std::string>();
  session.feedback_enabled = manifest.at("feedback_enabled").get<bool>();
  session.speed_history =
      manifest.value("speed_history", std::vector<double>{});
  session.demos = ReadTrajectoriesJsonl(dir / "demos.jsonl");
  if (manifest.contains("n_demos") &&
      manifest["n_demos"].get<size_t>() != session.demos.size()) {
    throw std::runtime_error("session manifest disagrees with demos.jsonl");
  }
  if (std::filesystem::exists(dir / "profiles.json")) {
    session.profiles.emplace();
    for (const nlohmann::json& p : ReadJsonFile(dir / "profiles.json")) {
      session.profiles->push_back(ProfileFromJson(p));
    }
  }
  return session;
}

}  // namespace fabco
