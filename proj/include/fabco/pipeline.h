#ifndef FABCO_PIPELINE_H_
#define FABCO_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabco/demonstrators.h"
#include "fabco/dynamics.h"
#include "fabco/nn.h"
#include "fabco/policy.h"
#include "fabco/sim_world.h"
#include "fabco/stats.h"

namespace fabco {

// Full description of one experiment. Every field has a desk-scale default;
// JSON overrides only need the fields they change.
struct ExperimentConfig {
  // experiment seeds; `ablation` runs the whole pipeline once per seed
  std::vector<std::uint64_t> seeds = {0, 1, 2};

  DemoEnvironment env;

  int n_robot_trajectories = 500;
  int robot_waypoints = 5;
  int robot_steps = 50;
  TrackingOptions tracking;

  nn::TrainConfig idm_train;
  nn::TrainConfig fdm_train;
  DynModelOptions dyn_options;

  nn::TrainConfig policy_train;
  PolicyOptions policy_options;

  double sigma_w = 0.15;
  int n_demos = 50;
  SynthDemoConfig session_fb;
  SynthDemoConfig session_no_fb;

  int n_eval_rollouts = 30;
  int rollout_max_steps = 60;

  ExperimentConfig();
  void Validate() const;
};

nlohmann::json ConfigToJson(const ExperimentConfig& cfg);
// Missing fields keep their defaults; unknown fields are rejected.
ExperimentConfig ConfigFromJson(const nlohmann::json& j);

nlohmann::json TrainConfigToJson(const nn::TrainConfig& cfg);
nn::TrainConfig TrainConfigFromJson(const nlohmann::json& j,
                                    nn::TrainConfig base = {});

// Stable hash of the canonical config JSON.
std::string ConfigHash(const ExperimentConfig& cfg);

// Stage 1: random robot trajectories. Seeds are derived from `seed`.
std::vector<Trajectory> CollectRobotData(const ExperimentConfig& cfg,
                                         std::uint64_t seed);

struct DynModels {
  DynModel idm;
  DynModel fdm;
};

// Stage 2.
DynModels TrainDynamics(const ExperimentConfig& cfg,
                        const std::vector<Trajectory>& robot_data,
                        std::uint64_t seed);

struct SessionPair {
  DemoSession fb;
  DemoSession no_fb;
};

// Stage 3: one synthetic session per arm.
SessionPair RunDemoSessions(const ExperimentConfig& cfg, const DynModels& dyn,
                            std::uint64_t seed);

// Stage 4: the demonstrations and weighting a variant is trained on.
PolicyModel TrainVariant(const ExperimentConfig& cfg, PolicyVariant variant,
                         const SessionPair& sessions, const DynModels& dyn,
                         std::uint64_t seed);

struct RolloutLog {
  Pose start;
  EnvObservation obs;
  bool success = false;
  int steps = 0;
};

struct EvalReport {
  std::string variant;
  int n_rollouts = 0;
  int successes = 0;
  double rate = 0.0;
  std::vector<RolloutLog> rollouts;
};

// Stage 5: n_rollouts closed-loop episodes from seeded start states. The
// same seed gives every variant the same starts.
EvalReport EvaluatePolicy(const PolicyModel& policy, const ExperimentConfig& cfg,
                          int n_rollouts, std::uint64_t seed);
// Same starts for any controller, e.g. the scripted reference.
EvalReport EvaluateController(const Controller& controller,
                              const std::string& name,
                              const ExperimentConfig& cfg, int n_rollouts,
                              std::uint64_t seed);

nlohmann::json EvalReportToJson(const EvalReport& report,
                                bool with_rollouts = true);
EvalReport EvalReportFromJson(const nlohmann::json& j);

struct SessionSummary {
  bool feedback_enabled = false;
  std::vector<double> mean_feasibility;  // per demonstration, in order
  // mean over demos 41-50 minus mean over demos 1-10 (or the first and last
  // fifth for shorter sessions)
  double improvement = 0.0;
};

SessionSummary SummarizeSession(const DemoSession& session,
                                const DynModels& dyn, double sigma_w);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EvalReport> variants;  // in kAllVariants order
  SessionSummary fb;
  SessionSummary no_fb;
  PairedFeasibilityStats feasibility;  // FB arm vs no-FB arm
  nlohmann::json provenance;  // content hashes of every stage artifact
};

struct ExperimentReport {
  std::string config_hash;
  std::vector<SeedResult> seeds;
};

nlohmann::json ReportToJson(const ExperimentReport& report);
// Success-rate table, one row per seed and one column per variant, rates
// printed as successes / n with one decimal ("28/30 93.3%").
std::string ReportTable(const ExperimentReport& report);
std::string FormatRate(int successes, int n);

using ProgressFn = std::function<void(const std::string&)>;

// Runs stages 1-5 for one seed. With a non-empty `work_dir` every stage is
// written under it and reused on a later call whose inputs hash the same.
SeedResult RunSeed(const ExperimentConfig& cfg, std::uint64_t seed,
                   const std::filesystem::path& work_dir,
                   const ProgressFn& progress = nullptr);

// All seeds, then report.json and report.txt in `out_dir`.
ExperimentReport RunAblation(const ExperimentConfig& cfg,
                             const std::filesystem::path& out_dir,
                             const ProgressFn& progress = nullptr);

// Artifact file names shared with the CLI and the service.
inline constexpr char kRobotDataFile[] = "robot.jsonl";
inline constexpr char kIdmFile[] = "idm.json";
inline constexpr char kFdmFile[] = "fdm.json";

DynModels LoadDynModels(const std::filesystem::path& dir);
void SaveDynModels(const DynModels& dyn, const std::filesystem::path& dir);

}  // namespace fabco

#endif  // FABCO_PIPELINE_H_
