#include "fabco/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fabco/feasibility.h"
#include "fabco/stats.h"
#include "fabco/trajectory_io.h"

namespace fabco {
namespace {

using nlohmann::json;

// Stream ids for MixSeed, one per consumer of randomness.
enum SeedStream : std::uint64_t {
  kRobotStream = 1,
  kIdmStream = 2,
  kFdmStream = 3,
  kFbSessionStream = 4,
  kNoFbSessionStream = 5,
  kEvalStream = 6,
  kPolicyStream = 7,
};

json ArrayJson(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
json RangeJson(const std::array<double, 2>& a) { return {a[0], a[1]}; }

template <size_t N>
void ReadArray(const json& j, const char* key, std::array<double, N>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != N) {
    throw std::invalid_argument(std::string("config field ") + key +
                                " must be an array of " + std::to_string(N));
  }
  for (size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
}

template <typename T>
void ReadField(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// Every key in `given` must also exist in `known` (recursively for objects).
void RejectUnknownKeys(const json& given, const json& known,
                       const std::string& path) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!known.contains(it.key())) {
      throw std::invalid_argument("unknown config field: " + path + it.key());
    }
    const json& k = known.at(it.key());
    if (k.is_object()) RejectUnknownKeys(it.value(), k, path + it.key() + ".");
  }
}

json SessionToJson(const SynthDemoConfig& c) {
  return {{"speed_multiplier", c.speed_multiplier},
          {"jitter_std", c.jitter_std},
          {"adaptation_rate", c.adaptation_rate},
          {"hold_steps", c.hold_steps}};
}

void SessionFromJson(const json& j, SynthDemoConfig& c) {
  ReadField(j, "speed_multiplier", c.speed_multiplier);
  ReadField(j, "jitter_std", c.jitter_std);
  ReadField(j, "adaptation_rate", c.adaptation_rate);
  ReadField(j, "hold_steps", c.hold_steps);
}

json StatsToJson(const PairedFeasibilityStats& s) {
  json j = {{"mean_fb", s.mean_fb},       {"mean_no_fb", s.mean_no_fb},
            {"std_fb", s.std_fb},         {"std_no_fb", s.std_no_fb},
            {"welch_t", s.welch.t},       {"welch_df", s.welch.df},
            {"p_defined", s.p_defined}};
  j["p_value"] = s.p_defined ? json(s.welch.p_value) : json(nullptr);
  return j;
}

std::string HashJson(const json& j) { return Fnv1aHex(j.dump()); }

std::string FileHash(const std::filesystem::path& path) {
  return Fnv1aHex(ReadTextFile(path));
}

// Stage bookkeeping: stages.json maps a stage name to the key of the inputs
// it was produced from.
class StageCache {
 public:
  explicit StageCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (enabled() && std::filesystem::exists(dir_ / "stages.json")) {
      keys_ = ReadJsonFile(dir_ / "stages.json");
    }
  }

  bool enabled() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }

  bool Fresh(const std::string& stage, const std::string& key,
             const std::vector<std::filesystem::path>& files) const {
    if (!enabled() || !keys_.contains(stage) || keys_[stage] != key) {
      return false;
    }
    return std::all_of(files.begin(), files.end(), [](const auto& f) {
      return std::filesystem::exists(f);
    });
  }

  void Mark(const std::string& stage, const std::string& key) {
    if (!enabled()) return;
    keys_[stage] = key;
    WriteJsonFile(dir_ / "stages.json", keys_);
  }

 private:
  std::filesystem::path dir_;
  json keys_ = json::object();
};

}  // namespace

ExperimentConfig::ExperimentConfig() {
  idm_train.epochs = 150;
  fdm_train.epochs = 150;
  policy_train.epochs = 300;
  policy_train.batch_size = 64;
  session_fb.speed_multiplier = 3.0;
  session_fb.adaptation_rate = 0.5;
  session_fb.feedback_enabled = true;
  session_no_fb.speed_multiplier = 3.0;
  session_no_fb.adaptation_rate = 0.5;
  session_no_fb.feedback_enabled = false;
}

void ExperimentConfig::Validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds is empty");
  env.limits.Validate();
  env.task.Validate();
  if (!(env.dt > 0.0)) throw std::invalid_argument("config: dt must be > 0");
  if (env.max_steps < 2) throw std::invalid_argument("config: demo_max_steps < 2");
  if (n_robot_trajectories < 1) {
    throw std::invalid_argument("config: n_robot_trajectories < 1");
  }
  if (robot_waypoints < 2 || robot_steps < robot_waypoints) {
    throw std::invalid_argument("config: bad robot trajectory shape");
  }
  if (!(tracking.gain_range[0] > 0.0) ||
      tracking.gain_range[1] < tracking.gain_range[0]) {
    throw std::invalid_argument("config: bad tracking gain range");
  }
  idm_train.Validate();
  fdm_train.Validate();
  policy_train.Validate();
  if (!(sigma_w > 0.0)) throw std::invalid_argument("config: sigma_w must be > 0");
  if (n_demos < 1) throw std::invalid_argument("config: n_demos < 1");
  session_fb.Validate();
  session_no_fb.Validate();
  if (n_eval_rollouts < 1) throw std::invalid_argument("config: n_eval_rollouts < 1");
  if (rollout_max_steps < 1) {
    throw std::invalid_argument("config: rollout_max_steps < 1");
  }
}

json TrainConfigToJson(const nn::TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"validation_fraction", c.validation_fraction},
          {"shuffle", c.shuffle}};
}

nn::TrainConfig TrainConfigFromJson(const json& j, nn::TrainConfig c) {
  ReadField(j, "batch_size", c.batch_size);
  ReadField(j, "epochs", c.epochs);
  ReadField(j, "learning_rate", c.learning_rate);
  ReadField(j, "beta1", c.beta1);
  ReadField(j, "beta2", c.beta2);
  ReadField(j, "epsilon", c.epsilon);
  ReadField(j, "validation_fraction", c.validation_fraction);
  ReadField(j, "shuffle", c.shuffle);
  return c;
}

json ConfigToJson(const ExperimentConfig& c) {
  const TaskSpec& t = c.env.task;
  return {
      {"seeds", c.seeds},
      {"dt", c.env.dt},
      {"robot",
       {{"max_speed", ArrayJson(c.env.limits.max_speed)},
        {"max_accel", ArrayJson(c.env.limits.max_accel)}}},
      {"task",
       {{"slot_x_range", RangeJson(t.slot_x_range)},
        {"slot_y_range", RangeJson(t.slot_y_range)},
        {"slot_theta_range", RangeJson(t.slot_theta_range)},
        {"slot_half_width", t.slot_half_width},
        {"start_x_range", RangeJson(t.start_x_range)},
        {"start_y_range", RangeJson(t.start_y_range)},
        {"start_theta_nominal", t.start_theta_nominal},
        {"start_theta_spread", t.start_theta_spread},
        {"tol_pos", t.tol_pos},
        {"tol_theta", t.tol_theta},
        {"entry_depth", t.entry_depth}}},
      {"robot_data",
       {{"n_trajectories", c.n_robot_trajectories},
        {"waypoints", c.robot_waypoints},
        {"steps", c.robot_steps},
        {"gain_range", RangeJson(c.tracking.gain_range)}}},
      {"idm_train", TrainConfigToJson(c.idm_train)},
      {"fdm_train", TrainConfigToJson(c.fdm_train)},
      {"dyn_hidden", c.dyn_options.hidden},
      {"idm_context", ToString(c.dyn_options.idm_context)},
      {"policy_train", TrainConfigToJson(c.policy_train)},
      {"policy_hidden", c.policy_options.hidden},
      {"sigma_w", c.sigma_w},
      {"n_demos", c.n_demos},
      {"demo_max_steps", c.env.max_steps},
      {"session_fb", SessionToJson(c.session_fb)},
      {"session_no_fb", SessionToJson(c.session_no_fb)},
      {"n_eval_rollouts", c.n_eval_rollouts},
      {"rollout_max_steps", c.rollout_max_steps},
  };
}

ExperimentConfig ConfigFromJson(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  RejectUnknownKeys(j, ConfigToJson(c), "");
  ReadField(j, "seeds", c.seeds);
  ReadField(j, "dt", c.env.dt);
  c.tracking.dt = c.env.dt;
  if (j.contains("robot")) {
    ReadArray(j["robot"], "max_speed", c.env.limits.max_speed);
    ReadArray(j["robot"], "max_accel", c.env.limits.max_accel);
  }
  if (j.contains("task")) {
    const json& t = j["task"];
    TaskSpec& task = c.env.task;
    ReadArray(t, "slot_x_range", task.slot_x_range);
    ReadArray(t, "slot_y_range", task.slot_y_range);
    ReadArray(t, "slot_theta_range", task.slot_theta_range);
    ReadField(t, "slot_half_width", task.slot_half_width);
    ReadArray(t, "start_x_range", task.start_x_range);
    ReadArray(t, "start_y_range", task.start_y_range);
    ReadField(t, "start_theta_nominal", task.start_theta_nominal);
    ReadField(t, "start_theta_spread", task.start_theta_spread);
    ReadField(t, "tol_pos", task.tol_pos);
    ReadField(t, "tol_theta", task.tol_theta);
    ReadField(t, "entry_depth", task.entry_depth);
  }
  if (j.contains("robot_data")) {
    const json& r = j["robot_data"];
    ReadField(r, "n_trajectories", c.n_robot_trajectories);
    ReadField(r, "waypoints", c.robot_waypoints);
    ReadField(r, "steps", c.robot_steps);
    ReadArray(r, "gain_range", c.tracking.gain_range);
  }
  if (j.contains("idm_train")) c.idm_train = TrainConfigFromJson(j["idm_train"], c.idm_train);
  if (j.contains("fdm_train")) c.fdm_train = TrainConfigFromJson(j["fdm_train"], c.fdm_train);
  ReadField(j, "dyn_hidden", c.dyn_options.hidden);
  if (j.contains("idm_context")) {
    c.dyn_options.idm_context =
        IdmContextFromString(j["idm_context"].get<std::string>());
  }
  if (j.contains("policy_train")) {
    c.policy_train = TrainConfigFromJson(j["policy_train"], c.policy_train);
  }
  ReadField(j, "policy_hidden", c.policy_options.hidden);
  ReadField(j, "sigma_w", c.sigma_w);
  ReadField(j, "n_demos", c.n_demos);
  ReadField(j, "demo_max_steps", c.env.max_steps);
  if (j.contains("session_fb")) SessionFromJson(j["session_fb"], c.session_fb);
  if (j.contains("session_no_fb")) SessionFromJson(j["session_no_fb"], c.session_no_fb);
  ReadField(j, "n_eval_rollouts", c.n_eval_rollouts);
  ReadField(j, "rollout_max_steps", c.rollout_max_steps);
  c.Validate();
  return c;
}

std::string ConfigHash(const ExperimentConfig& cfg) {
  return HashJson(ConfigToJson(cfg));
}

std::vector<Trajectory> CollectRobotData(const ExperimentConfig& cfg,
                                         std::uint64_t seed) {
  TrackingOptions tracking = cfg.tracking;
  tracking.dt = cfg.env.dt;
  const std::uint64_t base = MixSeed(seed, kRobotStream);
  std::vector<Trajectory> data;
  data.reserve(cfg.n_robot_trajectories);
  for (int i = 0; i < cfg.n_robot_trajectories; ++i) {
    data.push_back(GenerateRandomTrajectory(base + i, cfg.robot_waypoints,
                                            cfg.robot_steps, cfg.env.limits,
                                            tracking));
  }
  return data;
}

DynModels TrainDynamics(const ExperimentConfig& cfg,
                        const std::vector<Trajectory>& robot_data,
                        std::uint64_t seed) {
  DynDataset data = BuildDataset(robot_data);
  nn::TrainConfig idm_cfg = cfg.idm_train;
  idm_cfg.rng_seed = MixSeed(seed, kIdmStream);
  nn::TrainConfig fdm_cfg = cfg.fdm_train;
  fdm_cfg.rng_seed = MixSeed(seed, kFdmStream);
  return {TrainIdm(data, idm_cfg, cfg.dyn_options),
          TrainFdm(data, fdm_cfg, cfg.dyn_options)};
}

SessionPair RunDemoSessions(const ExperimentConfig& cfg, const DynModels& dyn,
                            std::uint64_t seed) {
  SynthDemoConfig fb = cfg.session_fb;
  fb.feedback_enabled = true;
  fb.rng_seed = MixSeed(seed, kFbSessionStream);
  SynthDemoConfig no_fb = cfg.session_no_fb;
  no_fb.feedback_enabled = false;
  no_fb.rng_seed = MixSeed(seed, kNoFbSessionStream);
  return {RunSession(fb, cfg.n_demos, dyn.idm, dyn.fdm, cfg.sigma_w, cfg.env),
          RunSession(no_fb, cfg.n_demos, dyn.idm, dyn.fdm, cfg.sigma_w,
                     cfg.env)};
}

PolicyModel TrainVariant(const ExperimentConfig& cfg, PolicyVariant variant,
                         const SessionPair& sessions, const DynModels& dyn,
                         std::uint64_t seed) {
  const DemoSession& session =
      UsesFeedbackDemos(variant) ? sessions.fb : sessions.no_fb;
  WeightedDemoSet set =
      BuildWeightedSet(session.demos, dyn.idm, dyn.fdm, cfg.sigma_w,
                       UsesFeasibilityWeights(variant));
  nn::TrainConfig train = cfg.policy_train;
  // shared across variants so only the data differs between arms
  train.rng_seed = MixSeed(seed, kPolicyStream);
  return TrainPolicy(set, train, variant, cfg.policy_options).model;
}

EvalReport EvaluateController(const Controller& controller,
                              const std::string& name,
                              const ExperimentConfig& cfg, int n_rollouts,
                              std::uint64_t seed) {
  if (n_rollouts < 1) throw std::invalid_argument("evaluation: n_rollouts < 1");
  std::mt19937_64 rng(MixSeed(seed, kEvalStream));
  EvalReport report;
  report.variant = name;
  report.n_rollouts = n_rollouts;
  for (int r = 0; r < n_rollouts; ++r) {
    State initial = SampleInitialState(rng, cfg.env.task);
    RolloutResult result = Rollout(controller, initial, cfg.env.limits,
                                   cfg.env.dt, cfg.rollout_max_steps,
                                   cfg.env.task);
    report.successes += result.success ? 1 : 0;
    report.rollouts.push_back(
        {initial.pose, initial.obs, result.success,
         static_cast<int>(result.trajectory.states.size())});
  }
  report.rate = static_cast<double>(report.successes) / n_rollouts;
  return report;
}

EvalReport EvaluatePolicy(const PolicyModel& policy,
                          const ExperimentConfig& cfg, int n_rollouts,
                          std::uint64_t seed) {
  return EvaluateController(
      [&policy](const State& s) { return policy.Act(s); },
      ToString(policy.variant()), cfg, n_rollouts, seed);
}

json EvalReportToJson(const EvalReport& report, bool with_rollouts) {
  json j = {{"variant", report.variant},
            {"n_rollouts", report.n_rollouts},
            {"successes", report.successes},
            {"rate", report.rate}};
  if (with_rollouts) {
    json logs = json::array();
    for (const RolloutLog& r : report.rollouts) {
      logs.push_back({{"start", PoseToJson(r.start)},
                      {"slot", PoseToJson(r.obs.slot_pose)},
                      {"half_width", r.obs.slot_half_width},
                      {"success", r.success},
                      {"steps", r.steps}});
    }
    j["rollouts"] = std::move(logs);
  }
  return j;
}

EvalReport EvalReportFromJson(const json& j) {
  EvalReport report;
  report.variant = j.at("variant").get<std::string>();
  report.n_rollouts = j.at("n_rollouts").get<int>();
  report.successes = j.at("successes").get<int>();
  report.rate = j.at("rate").get<double>();
  if (report.successes < 0 || report.successes > report.n_rollouts) {
    throw std::invalid_argument("evaluation report: successes out of range");
  }
  if (j.contains("rollouts")) {
    for (const json& r : j["rollouts"]) {
      RolloutLog log;
      log.start = PoseFromJson(r.at("start"));
      log.obs.slot_pose = PoseFromJson(r.at("slot"));
      log.obs.slot_half_width = r.at("half_width").get<double>();
      log.success = r.at("success").get<bool>();
      log.steps = r.at("steps").get<int>();
      report.rollouts.push_back(log);
    }
  }
  return report;
}

SessionSummary SummarizeSession(const DemoSession& session,
                                const DynModels& dyn, double sigma_w) {
  SessionSummary s;
  s.feedback_enabled = session.feedback_enabled;
  s.mean_feasibility =
      SessionMeanFeasibility(session, dyn.idm, dyn.fdm, sigma_w);
  const size_t n = s.mean_feasibility.size();
  const size_t k = std::max<size_t>(1, n / 5);
  std::vector<double> head(s.mean_feasibility.begin(),
                           s.mean_feasibility.begin() + k);
  std::vector<double> tail(s.mean_feasibility.end() - k,
                           s.mean_feasibility.end());
  s.improvement = Mean(tail) - Mean(head);
  return s;
}

std::string FormatRate(int successes, int n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d/%d %.1f%%", successes, n,
                100.0 * successes / n);
  return buf;
}

json ReportToJson(const ExperimentReport& report) {
  json seeds = json::array();
  for (const SeedResult& r : report.seeds) {
    json variants = json::array();
    for (const EvalReport& e : r.variants) {
      variants.push_back(EvalReportToJson(e, false));
    }
    auto session = [](const SessionSummary& s) {
      return json{{"feedback_enabled", s.feedback_enabled},
                  {"mean_feasibility", s.mean_feasibility},
                  {"improvement", s.improvement}};
    };
    seeds.push_back({{"seed", r.seed},
                     {"variants", std::move(variants)},
                     {"session_fb", session(r.fb)},
                     {"session_no_fb", session(r.no_fb)},
                     {"feasibility_stats", StatsToJson(r.feasibility)},
                     {"provenance", r.provenance}});
  }
  return {{"config_hash", report.config_hash}, {"seeds", std::move(seeds)}};
}

std::string ReportTable(const ExperimentReport& report) {
  constexpr int kSeedWidth = 6;
  constexpr int kColWidth = 21;
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s", kSeedWidth, "seed");
  out << buf;
  for (PolicyVariant v : kAllVariants) {
    std::snprintf(buf, sizeof(buf), "%-*s", kColWidth, DisplayName(v).c_str());
    out << buf;
  }
  out << "\n";
  std::vector<int> total_succ(std::size(kAllVariants), 0);
  std::vector<int> total_n(std::size(kAllVariants), 0);
  for (const SeedResult& r : report.seeds) {
    std::snprintf(buf, sizeof(buf), "%-*llu", kSeedWidth,
                  static_cast<unsigned long long>(r.seed));
    out << buf;
    for (size_t v = 0; v < r.variants.size(); ++v) {
      const EvalReport& e = r.variants[v];
      std::snprintf(buf, sizeof(buf), "%-*s", kColWidth,
                    FormatRate(e.successes, e.n_rollouts).c_str());
      out << buf;
      total_succ[v] += e.successes;
      total_n[v] += e.n_rollouts;
    }
    out << "\n";
  }
  if (report.seeds.size() > 1) {
    std::snprintf(buf, sizeof(buf), "%-*s", kSeedWidth, "all");
    out << buf;
    for (size_t v = 0; v < total_succ.size(); ++v) {
      std::snprintf(buf, sizeof(buf), "%-*s", kColWidth,
                    FormatRate(total_succ[v], total_n[v]).c_str());
      out << buf;
    }
    out << "\n";
  }
  // padding is for alignment only; drop it at line ends
  std::string table = out.str();
  std::string trimmed;
  size_t start = 0;
  while (start < table.size()) {
    size_t nl = table.find('\n', start);
    std::string line = table.substr(start, nl - start);
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + "\n";
    start = nl + 1;
  }
  return trimmed;
}

void SaveDynModels(const DynModels& dyn, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteJsonFile(dir / kIdmFile, dyn.idm.ToJson());
  WriteJsonFile(dir / kFdmFile, dyn.fdm.ToJson());
}

DynModels LoadDynModels(const std::filesystem::path& dir) {
  DynModels dyn{DynModel::FromJson(ReadJsonFile(dir / kIdmFile)),
                DynModel::FromJson(ReadJsonFile(dir / kFdmFile))};
  if (dyn.idm.kind() != DynKind::kIdm || dyn.fdm.kind() != DynKind::kFdm) {
    throw std::runtime_error("model files in " + dir.string() +
                             " have the wrong kind");
  }
  return dyn;
}

SeedResult RunSeed(const ExperimentConfig& cfg, std::uint64_t seed,
                   const std::filesystem::path& work_dir,
                   const ProgressFn& progress) {
  cfg.Validate();
  auto note = [&](const std::string& msg) {
    if (progress) progress("seed " + std::to_string(seed) + ": " + msg);
  };
  if (!work_dir.empty()) std::filesystem::create_directories(work_dir);
  StageCache cache(work_dir);
  const json c = ConfigToJson(cfg);
  const auto dir = cache.dir();

  // stage keys chain so a changed upstream input invalidates everything below
  const std::string robot_key =
      HashJson({seed, c["dt"], c["robot"], c["robot_data"]});
  const std::string dyn_key =
      HashJson({robot_key, c["idm_train"], c["fdm_train"], c["dyn_hidden"],
                c["idm_context"]});
  const std::string session_key =
      HashJson({dyn_key, c["task"], c["sigma_w"], c["n_demos"],
                c["demo_max_steps"], c["session_fb"], c["session_no_fb"]});

  SeedResult result;
  result.seed = seed;

  std::vector<Trajectory> robot;
  if (cache.Fresh("robot", robot_key, {dir / kRobotDataFile})) {
    note("reusing robot data");
    robot = ReadTrajectoriesJsonl(dir / kRobotDataFile);
  } else {
    note("collecting robot data");
    robot = CollectRobotData(cfg, seed);
    if (cache.enabled()) {
      WriteTrajectoriesJsonl(dir / kRobotDataFile, robot);
      cache.Mark("robot", robot_key);
    }
  }

  std::optional<DynModels> dyn;
  if (cache.Fresh("dynamics", dyn_key, {dir / kIdmFile, dir / kFdmFile})) {
    note("reusing dynamics models");
    dyn = LoadDynModels(dir);
  } else {
    note("training dynamics models");
    dyn = TrainDynamics(cfg, robot, seed);
    if (cache.enabled()) {
      SaveDynModels(*dyn, dir);
      cache.Mark("dynamics", dyn_key);
    }
  }

  std::optional<SessionPair> sessions;
  if (cache.Fresh("sessions", session_key,
                  {dir / "session_fb" / "manifest.json",
                   dir / "session_no_fb" / "manifest.json"})) {
    note("reusing demonstration sessions");
    sessions = SessionPair{LoadSession(dir / "session_fb"),
                           LoadSession(dir / "session_no_fb")};
  } else {
    note("running demonstration sessions");
    sessions = RunDemoSessions(cfg, *dyn, seed);
    if (cache.enabled()) {
      SaveSession(sessions->fb, dir / "session_fb");
      SaveSession(sessions->no_fb, dir / "session_no_fb");
      cache.Mark("sessions", session_key);
    }
  }
  result.fb = SummarizeSession(sessions->fb, *dyn, cfg.sigma_w);
  result.no_fb = SummarizeSession(sessions->no_fb, *dyn, cfg.sigma_w);
  result.feasibility = ComparePairedFeasibility(result.fb.mean_feasibility,
                                                result.no_fb.mean_feasibility);

  if (cache.enabled()) {
    result.provenance = {
        {"robot_data", FileHash(dir / kRobotDataFile)},
        {"idm", FileHash(dir / kIdmFile)},
        {"fdm", FileHash(dir / kFdmFile)},
        {"demos_fb", FileHash(dir / "session_fb" / "demos.jsonl")},
        {"demos_no_fb", FileHash(dir / "session_no_fb" / "demos.jsonl")},
        {"policies", json::object()}};
  } else {
    result.provenance = {{"idm", HashJson(dyn->idm.ToJson())},
                         {"fdm", HashJson(dyn->fdm.ToJson())},
                         {"policies", json::object()}};
  }

  for (PolicyVariant variant : kAllVariants) {
    const std::string name = ToString(variant);
    const std::filesystem::path file = dir / ("policy_" + name + ".json");
    const std::string key = HashJson(
        {session_key, c["policy_train"], c["policy_hidden"], name});
    std::optional<PolicyModel> policy;
    if (cache.Fresh("policy_" + name, key, {file})) {
      note("reusing policy " + name);
      policy = PolicyModel::FromJson(ReadJsonFile(file));
    } else {
      note("training policy " + name);
      policy = TrainVariant(cfg, variant, *sessions, *dyn, seed);
      if (cache.enabled()) {
        WriteJsonFile(file, policy->ToJson());
        cache.Mark("policy_" + name, key);
      }
    }
    result.provenance["policies"][name] =
        cache.enabled() ? FileHash(file) : HashJson(policy->ToJson());

    note("evaluating policy " + name);
    EvalReport eval = EvaluatePolicy(*policy, cfg, cfg.n_eval_rollouts, seed);
    if (cache.enabled()) {
      WriteJsonFile(dir / ("eval_" + name + ".json"), EvalReportToJson(eval));
    }
    result.variants.push_back(std::move(eval));
  }
  return result;
}

ExperimentReport RunAblation(const ExperimentConfig& cfg,
                             const std::filesystem::path& out_dir,
                             const ProgressFn& progress) {
  cfg.Validate();
  ExperimentReport report;
  report.config_hash = ConfigHash(cfg);
  std::filesystem::create_directories(out_dir);
  WriteJsonFile(out_dir / "config.json", ConfigToJson(cfg));
  for (std::uint64_t seed : cfg.seeds) {
    report.seeds.push_back(RunSeed(
        cfg, seed, out_dir / ("seed-" + std::to_string(seed)), progress));
  }
  WriteJsonFile(out_dir / "report.json", ReportToJson(report));
  WriteTextFile(out_dir / "report.txt", ReportTable(report));
  return report;
}

}  // namespace fabco
