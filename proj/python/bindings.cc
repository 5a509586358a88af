// Python bindings. Structured values cross the boundary as JSON text; the
// package __init__ turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <string>
#include <vector>

#include "fabco/demonstrators.h"
#include "fabco/feasibility.h"
#include "fabco/pipeline.h"
#include "fabco/policy.h"
#include "fabco/stats.h"
#include "fabco/trajectory_io.h"

namespace py = pybind11;
using nlohmann::json;

namespace fabco {
namespace {

using Triple = std::array<double, 3>;

Pose ToPose(const Triple& v) { return {v[0], v[1], v[2]}; }
Triple FromPose(const Pose& p) { return {p.x, p.y, p.theta}; }

ExperimentConfig ParseConfig(const std::string& text) {
  return text.empty() ? ExperimentConfig{} : ConfigFromJson(json::parse(text));
}

}  // namespace
}  // namespace fabco

PYBIND11_MODULE(_fabco, m) {
  using namespace fabco;
  m.doc() = "Feasibility-aware behavior cloning from observation";
  using release = py::call_guard<py::gil_scoped_release>;

  m.def("default_config", [] { return ConfigToJson(ExperimentConfig{}).dump(); });
  m.def("config_hash", [](const std::string& cfg) {
    return ConfigHash(ParseConfig(cfg));
  });

  m.def("feasibility_from_error", &FeasibilityFromError, py::arg("error"),
        py::arg("sigma_w"));

  m.def("welch_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          WelchResult w = WelchTTest(a, b);
          return py::dict(py::arg("mean_a") = w.mean_a,
                          py::arg("mean_b") = w.mean_b, py::arg("t") = w.t,
                          py::arg("df") = w.df, py::arg("p_value") = w.p_value);
        });

  m.def(
      "generate_random_trajectory",
      [](std::uint64_t seed, int n_waypoints, int steps) {
        return TrajectoryToJson(
                   GenerateRandomTrajectory(seed, n_waypoints, steps, RobotLimits{}))
            .dump();
      },
      py::arg("seed"), py::arg("n_waypoints") = 5, py::arg("steps") = 50);

  m.def(
      "synth_demo",
      [](double speed, std::uint64_t seed, double jitter) {
        SynthDemoConfig cfg;
        cfg.speed_multiplier = speed;
        cfg.jitter_std = jitter;
        DemoEnvironment env;
        std::mt19937_64 rng(seed);
        State s0 = SampleInitialState(rng, env.task);
        return TrajectoryToJson(SynthDemo(cfg, s0, env.max_steps, env, seed))
            .dump();
      },
      py::arg("speed_multiplier") = 1.0, py::arg("seed") = 0,
      py::arg("jitter_std") = 0.0);

  m.def(
      "task_success",
      [](const std::string& traj) {
        return TaskSuccess(TrajectoryFromJson(json::parse(traj)), TaskSpec{});
      },
      py::arg("trajectory"));

  py::class_<DynModels>(m, "DynModels")
      .def_static("load", [](const std::string& dir) { return LoadDynModels(dir); })
      .def("save", [](const DynModels& d, const std::string& dir) {
        SaveDynModels(d, dir);
      })
      .def("predict_action",
           [](const DynModels& d, const Triple& pose, const Triple& next) {
             Action a = d.idm.PredictAction(ToPose(pose), ToPose(next));
             return Triple{a[0], a[1], a[2]};
           })
      .def("predict_pose",
           [](const DynModels& d, const Triple& pose, const Triple& action) {
             return FromPose(
                 d.fdm.PredictPose(ToPose(pose), {action[0], action[1], action[2]}));
           })
      .def(
          "feasibility_profile",
          [](const DynModels& d, const std::string& traj, double sigma_w) {
            return ProfileToJson(
                       ComputeFeasibilityProfile(d.fdm, d.idm,
                                                 TrajectoryFromJson(json::parse(traj)),
                                                 sigma_w))
                .dump();
          },
          py::arg("trajectory"), py::arg("sigma_w") = kDefaultSigmaW);

  m.def(
      "train_dynamics",
      [](const std::string& cfg, std::uint64_t seed) {
        ExperimentConfig c = ParseConfig(cfg);
        return TrainDynamics(c, CollectRobotData(c, seed), seed);
      },
      py::arg("config") = "", py::arg("seed") = 0, release());

  m.def(
      "train_policy",
      [](const DynModels& dyn, const std::string& variant,
         const std::string& cfg, std::uint64_t seed) {
        ExperimentConfig c = ParseConfig(cfg);
        SessionPair sessions = RunDemoSessions(c, dyn, seed);
        return TrainVariant(c, PolicyVariantFromString(variant), sessions, dyn,
                            seed)
            .ToJson()
            .dump();
      },
      py::arg("models"), py::arg("variant") = "fabco", py::arg("config") = "",
      py::arg("seed") = 0, release());

  m.def(
      "evaluate_policy",
      [](const std::string& policy, const std::string& cfg, int n,
         std::uint64_t seed) {
        return EvalReportToJson(
                   EvaluatePolicy(PolicyModel::FromJson(json::parse(policy)),
                                  ParseConfig(cfg), n, seed),
                   false)
            .dump();
      },
      py::arg("policy"), py::arg("config") = "", py::arg("n_rollouts") = 30,
      py::arg("seed") = 0, release());

  m.def(
      "run_ablation",
      [](const std::string& cfg, const std::string& out_dir) {
        return ReportToJson(RunAblation(ParseConfig(cfg), out_dir)).dump();
      },
      py::arg("config"), py::arg("out_dir"), release());

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
}
