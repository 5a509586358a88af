#include "fabco/service.h"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fabco/demonstrators.h"
#include "fabco/feasibility.h"
#include "fabco/pipeline.h"
#include "fabco/policy.h"
#include "fabco/trajectory_io.h"

namespace fabco {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

// Error with an HTTP status attached; thrown by handlers, turned into a
// JSON error body by the dispatcher.
struct HttpError : std::runtime_error {
  HttpError(http::status s, const std::string& msg)
      : std::runtime_error(msg), status(s) {}
  http::status status;
};

HttpError BadRequest(const std::string& msg) {
  return {http::status::bad_request, msg};
}
HttpError NotFound(const std::string& msg) {
  return {http::status::not_found, msg};
}
HttpError Conflict(const std::string& msg) {
  return {http::status::conflict, msg};
}

std::string Target(const http::request<http::string_body>& req) {
  return std::string(req.target().data(), req.target().size());
}

std::vector<std::string> SplitPath(std::string_view target) {
  std::string_view path = target.substr(0, target.find('?'));
  std::vector<std::string> parts;
  size_t pos = 0;
  while (pos < path.size()) {
    size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

json ParseBody(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BadRequest("request body is not valid JSON");
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

double FiniteNumber(const json& v, const char* what) {
  if (!v.is_number()) throw BadRequest(std::string(what) + " must be a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw BadRequest(std::string(what) + " must be finite");
  return d;
}

// Accepts [x, y], [x, y, theta] or {x, y, theta?, t?}. Missing timestamps
// are spaced dt apart.
std::vector<RawPoint> ParsePolyline(const json& points, double dt) {
  if (!points.is_array()) throw BadRequest("points must be an array");
  if (points.size() < 2) throw BadRequest("points needs at least 2 entries");
  std::vector<RawPoint> out;
  out.reserve(points.size());
  for (size_t k = 0; k < points.size(); ++k) {
    const json& p = points[k];
    RawPoint raw;
    raw.t = k * dt;
    if (p.is_array()) {
      if (p.size() < 2 || p.size() > 3) {
        throw BadRequest("point " + std::to_string(k) +
                         " must have 2 or 3 coordinates");
      }
      raw.x = FiniteNumber(p[0], "x");
      raw.y = FiniteNumber(p[1], "y");
      if (p.size() == 3) raw.theta = FiniteNumber(p[2], "theta");
    } else if (p.is_object()) {
      if (!p.contains("x") || !p.contains("y")) {
        throw BadRequest("point " + std::to_string(k) + " needs x and y");
      }
      raw.x = FiniteNumber(p["x"], "x");
      raw.y = FiniteNumber(p["y"], "y");
      if (p.contains("theta")) raw.theta = FiniteNumber(p["theta"], "theta");
      if (p.contains("t")) raw.t = FiniteNumber(p["t"], "t");
    } else {
      throw BadRequest("point " + std::to_string(k) + " is malformed");
    }
    out.push_back(raw);
  }
  return out;
}

struct StoredDemo {
  std::string session_id;
  Trajectory trajectory;
  FeasibilityProfile profile;
};

struct Session {
  std::string id;
  bool feedback_enabled = true;
  std::vector<std::string> demo_ids;
};

struct Job {
  std::string id;
  std::string kind;
  std::string status = "queued";  // queued, running, done, failed
  double progress = 0.0;
  json request;
  json result;
  // artifact path relative to the work directory, once done
  std::string locator;
  std::string error;

  json ToJson() const {
    json j = {{"id", id}, {"kind", kind}, {"status", status},
              {"progress", progress}};
    if (status == "done") {
      j["result"] = result;
      if (!locator.empty()) j["locator"] = locator;
    }
    if (!error.empty()) j["error"] = error;
    return j;
  }
};

struct StoredRollout {
  std::string policy_id;
  RolloutResult result;
};

const std::set<std::string> kJobKinds = {"collect_robot", "train_dynamics",
                                         "train_policy", "evaluate", "sleep"};

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceOptions opts) : options(std::move(opts)) {}

  ServiceOptions options;
  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::uint16_t bound_port = 0;

  // connection bookkeeping, so Stop can close sockets and wait
  std::mutex conn_mu;
  std::condition_variable conn_cv;
  std::set<std::shared_ptr<tcp::socket>> sockets;
  int active_connections = 0;

  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;
  bool started = false;

  // domain state
  std::mutex mu;
  std::shared_ptr<const DynModels> models;
  std::map<std::string, Session> sessions;
  std::string current_session;
  std::map<std::string, StoredDemo> demos;
  std::map<std::string, std::shared_ptr<const PolicyModel>> policies;
  std::map<std::string, StoredRollout> rollouts;
  int next_session = 1;
  int next_demo = 1;
  int next_policy = 1;
  int next_rollout = 1;

  // single-job executor
  std::mutex job_mu;
  std::condition_variable job_cv;
  std::map<std::string, Job> jobs;
  std::deque<std::string> job_queue;
  int next_job = 1;
  bool executor_stop = false;
  std::thread executor;

  ExperimentConfig BaseConfig(const json& fragment = json::object()) const {
    json merged = ConfigToJson(ConfigFromJson(options.config));
    if (!fragment.is_object()) throw BadRequest("config must be an object");
    merged.merge_patch(fragment);
    try {
      return ConfigFromJson(merged);
    } catch (const std::exception& e) {
      throw BadRequest(e.what());
    }
  }

  // --- startup -----------------------------------------------------------

  void LoadArtifacts() {
    std::filesystem::create_directories(options.work_dir);
    if (std::filesystem::exists(options.work_dir / kIdmFile) &&
        std::filesystem::exists(options.work_dir / kFdmFile)) {
      models = std::make_shared<const DynModels>(LoadDynModels(options.work_dir));
    }
    const auto dir = options.work_dir / "policies";
    if (std::filesystem::exists(dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        policies[entry.path().stem().string()] =
            std::make_shared<const PolicyModel>(
                PolicyModel::FromJson(ReadJsonFile(entry.path())));
      }
      next_policy = static_cast<int>(policies.size()) + 1;
    }
    // a session exists from the start so demos can be posted right away
    CreateSession(true);
  }

  std::string CreateSession(bool feedback_enabled) {
    Session s;
    s.id = "session-" + std::to_string(next_session++);
    s.feedback_enabled = feedback_enabled;
    current_session = s.id;
    sessions[s.id] = s;
    return s.id;
  }

  std::shared_ptr<const DynModels> RequireModels() {
    std::lock_guard<std::mutex> lock(mu);
    if (!models) {
      throw Conflict("dynamics models are not trained yet; submit a "
                     "train_dynamics job first");
    }
    return models;
  }

  // --- handlers ----------------------------------------------------------

  json PostSession(const json& body) {
    bool fb = true;
    if (body.contains("feedback_enabled")) {
      if (!body["feedback_enabled"].is_boolean()) {
        throw BadRequest("feedback_enabled must be a boolean");
      }
      fb = body["feedback_enabled"].get<bool>();
    }
    std::lock_guard<std::mutex> lock(mu);
    std::string id = CreateSession(fb);
    return {{"session_id", id}, {"feedback_enabled", fb}};
  }

  json PostDemo(const json& body) {
    ExperimentConfig cfg = BaseConfig();
    Trajectory traj;
    if (body.contains("states")) {
      try {
        traj = TrajectoryFromJson(body);
        ValidateTrajectory(traj);
      } catch (const std::exception& e) {
        throw BadRequest(std::string("malformed trajectory: ") + e.what());
      }
    } else if (body.contains("points")) {
      double dt = cfg.env.dt;
      if (body.contains("dt")) dt = FiniteNumber(body["dt"], "dt");
      if (!(dt > 0.0)) throw BadRequest("dt must be positive");
      EnvObservation obs;
      const TaskSpec& task = cfg.env.task;
      obs.slot_pose = {0.5 * (task.slot_x_range[0] + task.slot_x_range[1]),
                       0.5 * (task.slot_y_range[0] + task.slot_y_range[1]),
                       0.5 * (task.slot_theta_range[0] +
                              task.slot_theta_range[1])};
      obs.slot_half_width = task.slot_half_width;
      if (body.contains("slot")) {
        const json& s = body["slot"];
        if (!s.is_object()) throw BadRequest("slot must be an object");
        try {
          obs.slot_pose = PoseFromJson(s);
        } catch (const std::exception& e) {
          throw BadRequest(std::string("malformed slot: ") + e.what());
        }
        if (s.contains("half_width")) {
          obs.slot_half_width = FiniteNumber(s["half_width"], "half_width");
        }
      }
      std::vector<RawPoint> points = ParsePolyline(body["points"], dt);
      try {
        traj = IngestHumanDemo(points, dt, obs, "");
      } catch (const std::invalid_argument& e) {
        throw BadRequest(e.what());
      }
    } else {
      throw BadRequest("expected a trajectory (states) or a polyline (points)");
    }

    auto dyn = RequireModels();
    std::string id;
    {
      std::lock_guard<std::mutex> lock(mu);
      id = "demo-" + std::to_string(next_demo++);
    }
    traj.id = id;
    FeasibilityProfile profile =
        ComputeFeasibilityProfile(dyn->fdm, dyn->idm, traj, cfg.sigma_w);

    std::lock_guard<std::mutex> lock(mu);
    Session& session = sessions.at(current_session);
    session.demo_ids.push_back(id);
    json reply = {{"demo_id", id},
                  {"session_id", session.id},
                  {"feedback_enabled", session.feedback_enabled},
                  {"n_states", traj.states.size()}};
    if (session.feedback_enabled) {
      reply["profile"] = ProfileToJson(profile);
      reply["colormap"] = ColorMapToJson(Colorize(profile, traj));
    }
    demos[id] = {session.id, std::move(traj), std::move(profile)};
    return reply;
  }

  json GetFeasibility(const std::string& demo_id, bool want_svg) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = demos.find(demo_id);
    if (it == demos.end()) throw NotFound("unknown demo " + demo_id);
    const StoredDemo& d = it->second;
    ColorMapPayload payload = Colorize(d.profile, d.trajectory);
    json reply = {{"profile", ProfileToJson(d.profile)},
                  {"colormap", ColorMapToJson(payload)}};
    if (want_svg) {
      reply["svg"] = ColorMapToSvg(payload, d.trajectory.states.front().obs);
    }
    return reply;
  }

  json GetHistory() {
    std::lock_guard<std::mutex> lock(mu);
    const Session& s = sessions.at(current_session);
    json history = json::array();
    for (size_t k = 0; k < s.demo_ids.size(); ++k) {
      const FeasibilityProfile& p = demos.at(s.demo_ids[k]).profile;
      history.push_back(
          {{"index", k + 1}, {"demo_id", s.demo_ids[k]}, {"mean", p.mean},
           {"min", p.min}});
    }
    return {{"session_id", s.id},
            {"feedback_enabled", s.feedback_enabled},
            {"history", std::move(history)}};
  }

  json PostJob(const json& body) {
    if (!body.contains("kind") || !body["kind"].is_string()) {
      throw BadRequest("job needs a string kind");
    }
    std::string kind = body["kind"].get<std::string>();
    if (!kJobKinds.count(kind)) throw BadRequest("unknown job kind " + kind);
    // reject bad configs and missing prerequisites before queueing
    BaseConfig(body.value("config", json::object()));
    if (kind == "train_policy") {
      RequireModels();
      PolicyVariantFromStringOr400(body.value("variant", "fabco"));
    }
    if (kind == "evaluate") LookupPolicy(body.value("policy_id", ""));

    std::lock_guard<std::mutex> lock(job_mu);
    Job job;
    job.id = "job-" + std::to_string(next_job++);
    job.kind = kind;
    job.request = body;
    jobs[job.id] = job;
    job_queue.push_back(job.id);
    job_cv.notify_all();
    return job.ToJson();
  }

  json GetJob(const std::string& id) {
    std::lock_guard<std::mutex> lock(job_mu);
    auto it = jobs.find(id);
    if (it == jobs.end()) throw NotFound("unknown job " + id);
    return it->second.ToJson();
  }

  static PolicyVariant PolicyVariantFromStringOr400(const std::string& name) {
    try {
      return PolicyVariantFromString(name);
    } catch (const std::invalid_argument& e) {
      throw BadRequest(e.what());
    }
  }

  std::shared_ptr<const PolicyModel> LookupPolicy(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = policies.find(id);
    if (it == policies.end()) throw NotFound("unknown policy " + id);
    return it->second;
  }

  json PostRollout(const json& body) {
    if (!body.contains("policy_id") || !body["policy_id"].is_string()) {
      throw BadRequest("policy_id is required");
    }
    auto policy = LookupPolicy(body["policy_id"].get<std::string>());
    ExperimentConfig cfg = BaseConfig();
    std::uint64_t seed = 0;
    if (body.contains("seed")) {
      if (!body["seed"].is_number_integer()) throw BadRequest("seed must be an integer");
      seed = body["seed"].get<std::uint64_t>();
    }
    int max_steps = cfg.rollout_max_steps;
    if (body.contains("max_steps")) {
      if (!body["max_steps"].is_number_integer() ||
          body["max_steps"].get<int>() < 1) {
        throw BadRequest("max_steps must be a positive integer");
      }
      max_steps = body["max_steps"].get<int>();
    }
    std::mt19937_64 rng(seed);
    State initial = SampleInitialState(rng, cfg.env.task);
    RolloutResult result = Rollout(*policy, initial, cfg.env.limits, cfg.env.dt,
                                   max_steps, cfg.env.task);
    std::lock_guard<std::mutex> lock(mu);
    std::string id = "rollout-" + std::to_string(next_rollout++);
    result.trajectory.id = id;
    rollouts[id] = {body["policy_id"].get<std::string>(), std::move(result)};
    return {{"rollout_id", id},
            {"stream", "/ws/rollouts/" + id},
            {"n_states", rollouts[id].result.trajectory.states.size()},
            {"slot", PoseToJson(initial.obs.slot_pose)}};
  }

  // --- job executor --------------------------------------------------------

  void ExecutorLoop() {
    for (;;) {
      std::string id;
      json request;
      std::string kind;
      {
        std::unique_lock<std::mutex> lock(job_mu);
        job_cv.wait(lock, [&] { return executor_stop || !job_queue.empty(); });
        if (executor_stop) return;
        id = job_queue.front();
        job_queue.pop_front();
        Job& job = jobs.at(id);
        job.status = "running";
        request = job.request;
        kind = job.kind;
      }
      json result;
      std::string locator;
      std::string error;
      try {
        result = RunJob(id, kind, request, &locator);
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard<std::mutex> lock(job_mu);
      Job& job = jobs.at(id);
      job.status = error.empty() ? "done" : "failed";
      if (error.empty()) {
        job.progress = 1.0;
        job.result = result;
        job.locator = locator;
      }
      job.error = error;
    }
  }

  void SetProgress(const std::string& job_id, double fraction) {
    std::lock_guard<std::mutex> lock(job_mu);
    jobs.at(job_id).progress = fraction;
  }

  json RunJob(const std::string& job_id, const std::string& kind,
              const json& request, std::string* locator) {
    ExperimentConfig cfg = BaseConfig(request.value("config", json::object()));
    std::uint64_t seed = request.value("seed", cfg.seeds.front());
    const auto& dir = options.work_dir;
    if (kind == "sleep") {
      // diagnostic job: occupies the executor for duration_ms
      int ms = request.value("duration_ms", 100);
      std::unique_lock<std::mutex> lock(job_mu);
      job_cv.wait_for(lock, std::chrono::milliseconds(ms),
                      [&] { return executor_stop; });
      return {{"slept_ms", ms}};
    }
    if (kind == "collect_robot") {
      auto data = CollectRobotData(cfg, seed);
      WriteTrajectoriesJsonl(dir / kRobotDataFile, data);
      *locator = kRobotDataFile;
      return {{"n_trajectories", data.size()}};
    }
    if (kind == "train_dynamics") {
      std::vector<Trajectory> data;
      if (std::filesystem::exists(dir / kRobotDataFile) &&
          !request.value("recollect", false)) {
        data = ReadTrajectoriesJsonl(dir / kRobotDataFile);
      } else {
        data = CollectRobotData(cfg, seed);
        WriteTrajectoriesJsonl(dir / kRobotDataFile, data);
      }
      SetProgress(job_id, 0.1);
      DynModels dyn = TrainDynamics(cfg, data, seed);
      SaveDynModels(dyn, dir);
      json reply = {{"idm", kIdmFile},
                    {"fdm", kFdmFile},
                    {"idm_best_val_loss", dyn.idm.checkpoint().best_val_loss},
                    {"fdm_best_val_loss", dyn.fdm.checkpoint().best_val_loss}};
      WriteJsonFile(dir / "dynamics_manifest.json", reply);
      *locator = "dynamics_manifest.json";
      std::lock_guard<std::mutex> lock(mu);
      models = std::make_shared<const DynModels>(std::move(dyn));
      return reply;
    }
    if (kind == "train_policy") {
      auto dyn = RequireModels();
      PolicyVariant variant =
          PolicyVariantFromStringOr400(request.value("variant", "fabco"));
      std::vector<Trajectory> session_demos;
      {
        std::lock_guard<std::mutex> lock(mu);
        std::string sid = request.value("session_id", current_session);
        auto it = sessions.find(sid);
        if (it == sessions.end()) throw std::runtime_error("unknown session " + sid);
        for (const std::string& d : it->second.demo_ids) {
          session_demos.push_back(demos.at(d).trajectory);
        }
      }
      if (session_demos.empty()) {
        throw std::runtime_error("the session has no demonstrations");
      }
      WeightedDemoSet set =
          BuildWeightedSet(session_demos, dyn->idm, dyn->fdm, cfg.sigma_w,
                           UsesFeasibilityWeights(variant));
      SetProgress(job_id, 0.1);
      nn::TrainConfig train = cfg.policy_train;
      train.rng_seed = MixSeed(seed, 7);
      PolicyModel model =
          TrainPolicy(set, train, variant, cfg.policy_options).model;
      std::string id;
      {
        std::lock_guard<std::mutex> lock(mu);
        id = "policy-" + std::to_string(next_policy++);
        while (policies.count(id)) id = "policy-" + std::to_string(next_policy++);
      }
      std::filesystem::create_directories(dir / "policies");
      WriteJsonFile(dir / "policies" / (id + ".json"), model.ToJson());
      *locator = "policies/" + id + ".json";
      std::lock_guard<std::mutex> lock(mu);
      policies[id] = std::make_shared<const PolicyModel>(std::move(model));
      return {{"policy_id", id},
              {"variant", ToString(variant)},
              {"n_records", set.size()}};
    }
    if (kind == "evaluate") {
      auto policy = LookupPolicy(request.value("policy_id", ""));
      int n = request.value("n_rollouts", cfg.n_eval_rollouts);
      json report = EvalReportToJson(EvaluatePolicy(*policy, cfg, n, seed));
      std::filesystem::create_directories(dir / "evals");
      WriteJsonFile(dir / "evals" / (job_id + ".json"), report);
      *locator = "evals/" + job_id + ".json";
      return EvalReportToJson(EvalReportFromJson(report), false);
    }
    throw std::runtime_error("unknown job kind " + kind);
  }

  // --- transport -----------------------------------------------------------

  http::response<http::string_body> Dispatch(
      const http::request<http::string_body>& req) {
    http::status status = http::status::ok;
    json body;
    try {
      body = Route(req, status);
    } catch (const HttpError& e) {
      status = e.status;
      body = {{"error", e.what()}};
    } catch (const json::exception& e) {
      status = http::status::bad_request;
      body = {{"error", e.what()}};
    } catch (const std::invalid_argument& e) {
      status = http::status::bad_request;
      body = {{"error", e.what()}};
    } catch (const std::exception& e) {
      status = http::status::internal_server_error;
      body = {{"error", e.what()}};
    }
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(false);
    res.body() = body.dump();
    res.prepare_payload();
    return res;
  }

  json Route(const http::request<http::string_body>& req,
             http::status& status) {
    const auto parts = SplitPath(Target(req));
    const auto method = req.method();
    const bool get = method == http::verb::get;
    const bool post = method == http::verb::post;
    auto is = [&](std::initializer_list<const char*> want) {
      if (parts.size() != want.size()) return false;
      size_t i = 0;
      for (const char* w : want) {
        if (std::string(w) != "*" && parts[i] != w) return false;
        ++i;
      }
      return true;
    };
    if (is({"api", "health"}) && get) return {{"status", "ok"}};
    if (is({"api", "models"}) && get) {
      std::lock_guard<std::mutex> lock(mu);
      json p = json::array();
      for (const auto& [id, model] : policies) {
        p.push_back({{"policy_id", id}, {"variant", ToString(model->variant())}});
      }
      return {{"dynamics_ready", models != nullptr}, {"policies", p}};
    }
    if (is({"api", "session"}) && post) return PostSession(ParseBody(req.body()));
    if (is({"api", "demos"}) && post) {
      status = http::status::created;
      return PostDemo(ParseBody(req.body()));
    }
    if (is({"api", "demos", "*", "feasibility"}) && get) {
      bool svg = Target(req).find("svg=1") != std::string::npos;
      return GetFeasibility(parts[2], svg);
    }
    if (is({"api", "session", "feasibility-history"}) && get) return GetHistory();
    if (is({"api", "jobs"}) && post) {
      status = http::status::accepted;
      return PostJob(ParseBody(req.body()));
    }
    if (is({"api", "jobs", "*"}) && get) return GetJob(parts[2]);
    if (is({"api", "rollouts"}) && post) {
      status = http::status::created;
      return PostRollout(ParseBody(req.body()));
    }
    throw NotFound("no route for " + std::string(req.method_string()) + " " + Target(req));
  }

  void StreamRollout(websocket::stream<tcp::socket&>& ws,
                     const std::string& id) {
    RolloutResult result;
    {
      std::lock_guard<std::mutex> lock(mu);
      result = rollouts.at(id).result;
    }
    ws.text(true);
    const auto& states = result.trajectory.states;
    for (size_t t = 0; t < states.size(); ++t) {
      const Pose& p = states[t].pose;
      json ev = {{"type", "pose"}, {"t", t}, {"x", p.x}, {"y", p.y},
                 {"theta", p.theta}};
      ws.write(asio::buffer(ev.dump()));
      if (options.pace_ms > 0 && t + 1 < states.size()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(options.pace_ms));
      }
    }
    json end = {{"type", "end"},
                {"success", result.success},
                {"steps", states.size()}};
    ws.write(asio::buffer(end.dump()));
    ws.close(websocket::close_code::normal);
  }

  void HandleConnection(std::shared_ptr<tcp::socket> sock) {
    try {
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::read(*sock, buffer, req);
      if (websocket::is_upgrade(req)) {
        const auto parts = SplitPath(Target(req));
        bool known = false;
        if (parts.size() == 3 && parts[0] == "ws" && parts[1] == "rollouts") {
          std::lock_guard<std::mutex> lock(mu);
          known = rollouts.count(parts[2]) > 0;
        }
        if (!known) {
          http::response<http::string_body> res{http::status::not_found,
                                                req.version()};
          res.body() = json{{"error", "unknown rollout stream"}}.dump();
          res.prepare_payload();
          http::write(*sock, res);
        } else {
          websocket::stream<tcp::socket&> ws(*sock);
          ws.accept(req);
          StreamRollout(ws, parts[2]);
        }
      } else {
        auto res = Dispatch(req);
        http::write(*sock, res);
      }
      beast::error_code ec;
      sock->shutdown(tcp::socket::shutdown_send, ec);
    } catch (const std::exception&) {
      // client went away or the server is stopping
    }
    std::lock_guard<std::mutex> lock(conn_mu);
    sockets.erase(sock);
    --active_connections;
    conn_cv.notify_all();
  }

  void DoAccept() {
    auto sock = std::make_shared<tcp::socket>(ioc);
    acceptor->async_accept(*sock, [this, sock](beast::error_code ec) {
      if (ec) return;  // acceptor closed
      {
        std::lock_guard<std::mutex> lock(conn_mu);
        sockets.insert(sock);
        ++active_connections;
      }
      std::thread([this, sock] { HandleConnection(sock); }).detach();
      DoAccept();
    });
  }
};

Service::Service(ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { Stop(); }

void Service::Start() {
  Impl& s = *impl_;
  if (s.started) throw std::logic_error("Service already started");
  s.BaseConfig();  // validate the base config up front
  s.LoadArtifacts();
  auto address = asio::ip::make_address(s.options.host);
  s.acceptor.emplace(s.ioc);
  tcp::endpoint endpoint(address, s.options.port);
  s.acceptor->open(endpoint.protocol());
  s.acceptor->set_option(asio::socket_base::reuse_address(true));
  s.acceptor->bind(endpoint);
  s.acceptor->listen();
  s.bound_port = s.acceptor->local_endpoint().port();
  s.started = true;
  s.executor = std::thread([&s] { s.ExecutorLoop(); });
  s.DoAccept();
  s.accept_thread = std::thread([&s] { s.ioc.run(); });
}

void Service::Stop() {
  Impl& s = *impl_;
  {
    std::lock_guard<std::mutex> lock(s.stop_mu);
    if (!s.started || s.stopped) return;
    s.stopped = true;
  }
  asio::post(s.ioc, [&s] {
    beast::error_code ec;
    s.acceptor->close(ec);
  });
  s.accept_thread.join();
  {
    std::unique_lock<std::mutex> lock(s.conn_mu);
    for (const auto& sock : s.sockets) {
      beast::error_code ec;
      sock->shutdown(tcp::socket::shutdown_both, ec);
    }
    s.conn_cv.wait(lock, [&s] { return s.active_connections == 0; });
  }
  {
    std::lock_guard<std::mutex> lock(s.job_mu);
    s.executor_stop = true;
    s.job_cv.notify_all();
  }
  s.executor.join();
  s.stop_cv.notify_all();
}

void Service::Wait() {
  std::unique_lock<std::mutex> lock(impl_->stop_mu);
  impl_->stop_cv.wait(lock, [this] { return impl_->stopped; });
}

std::uint16_t Service::port() const { return impl_->bound_port; }

}  // namespace fabco
