// Command-line front end for the FABCO workbench.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fabco/demonstrators.h"
#include "fabco/dynamics.h"
#include "fabco/feasibility.h"
#include "fabco/pipeline.h"
#include "fabco/policy.h"
#include "fabco/trajectory_io.h"

#ifdef FABCO_WITH_SERVICE
#include "fabco/service.h"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

fabco::ExperimentConfig LoadConfig(const GlobalOptions& g) {
  json j = json::object();
  if (!g.config_path.empty()) j = fabco::ReadJsonFile(g.config_path);
  if (g.seed) j["seeds"] = {*g.seed};
  return fabco::ConfigFromJson(j);
}

std::uint64_t FirstSeed(const fabco::ExperimentConfig& cfg) {
  return cfg.seeds.front();
}

fabco::ProgressFn Progress(const GlobalOptions& g) {
  if (g.quiet) return nullptr;
  return [](const std::string& msg) { std::cerr << msg << "\n"; };
}

void Log(const GlobalOptions& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fabco: feasibility-aware behavior cloning from observation"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config JSON")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the experiment seed");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  // collect-robot
  auto* collect = app.add_subcommand("collect-robot",
                                     "Generate random robot trajectories");
  std::string collect_out = "work";
  collect->add_option("--out", collect_out, "Output directory");

  // train-dynamics
  auto* train_dyn = app.add_subcommand("train-dynamics",
                                       "Train the inverse and forward models");
  std::string dyn_data;
  std::string dyn_out = "work";
  train_dyn->add_option("--data", dyn_data, "Robot trajectories (JSONL)")
      ->check(CLI::ExistingFile);
  train_dyn->add_option("--out", dyn_out, "Output directory");

  // demo-session
  auto* session_cmd = app.add_subcommand(
      "demo-session", "Record a demonstration session (synthetic or from disk)");
  bool fb = false;
  bool no_fb = false;
  bool synthetic = false;
  std::string from_dir;
  std::string models_dir = "work";
  std::string session_out;
  std::optional<double> speed;
  std::optional<double> adaptation;
  std::optional<int> n_demos;
  session_cmd->add_flag("--fb", fb, "Show feasibility feedback");
  session_cmd->add_flag("--no-fb", no_fb, "Withhold feedback");
  session_cmd->add_flag("--synthetic", synthetic, "Use the synthetic demonstrator");
  session_cmd->add_option("--from-dir", from_dir,
                          "Directory holding demos.jsonl of human demonstrations")
      ->check(CLI::ExistingDirectory);
  session_cmd->add_option("--models", models_dir, "Directory with idm.json/fdm.json");
  session_cmd->add_option("--out", session_out, "Session output directory")
      ->required();
  session_cmd->add_option("--speed", speed, "Initial speed multiplier");
  session_cmd->add_option("--adaptation", adaptation, "Adaptation rate");
  session_cmd->add_option("--n-demos", n_demos, "Number of demonstrations");

  // score
  auto* score = app.add_subcommand("score", "Feasibility profiles for demos");
  std::string score_demos;
  std::string score_models = "work";
  std::string score_out;
  std::vector<double> sigmas;
  bool score_svg = false;
  score->add_option("--demos", score_demos, "Demonstrations (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  score->add_option("--models", score_models, "Directory with idm.json/fdm.json");
  score->add_option("--out", score_out, "Write profiles and color maps here");
  score->add_option("--sigma", sigmas, "sigma_w values to sweep");
  score->add_flag("--svg", score_svg, "Also write an SVG per demonstration");

  // train-policy
  auto* train_pol = app.add_subcommand("train-policy", "Train one policy variant");
  std::string variant_name = "fabco";
  std::string pol_models = "work";
  std::string fb_session;
  std::string no_fb_session;
  std::string pol_out;
  train_pol->add_option("--variant", variant_name,
                        "fabco | fabco_no_weight | fabco_no_fb | bco");
  train_pol->add_option("--models", pol_models, "Directory with idm.json/fdm.json");
  train_pol->add_option("--fb-session", fb_session, "Session recorded with feedback");
  train_pol->add_option("--no-fb-session", no_fb_session,
                        "Session recorded without feedback");
  train_pol->add_option("--out", pol_out, "Policy checkpoint path")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Roll out a policy");
  std::string eval_policy;
  std::optional<int> eval_n;
  std::string eval_out;
  evaluate->add_option("--policy", eval_policy, "Policy checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--n", eval_n, "Number of rollouts");
  evaluate->add_option("--out", eval_out, "Write the JSON report here");

  // ablation
  auto* ablation = app.add_subcommand("ablation",
                                      "Run the full four-variant experiment");
  std::string ablation_out = "ablation";
  ablation->add_option("--out", ablation_out, "Output directory");

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP/WebSocket service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string serve_dir = "work";
  int pace_ms = 30;
  serve->add_option("--host", host, "Bind address")->envname("FABCO_HOST");
  serve->add_option("--port", port, "Port (0 = any free port)")
      ->envname("FABCO_PORT");
  serve->add_option("--workdir", serve_dir, "Model and artifact directory");
  serve->add_option("--pace-ms", pace_ms, "Delay between streamed rollout events");

  CLI11_PARSE(app, argc, argv);

  try {
    const fabco::ExperimentConfig cfg = LoadConfig(g);
    const std::uint64_t seed = FirstSeed(cfg);

    if (*collect) {
      auto data = fabco::CollectRobotData(cfg, seed);
      fs::create_directories(collect_out);
      fabco::WriteTrajectoriesJsonl(fs::path(collect_out) / fabco::kRobotDataFile,
                                    data);
      fabco::DynDataset dataset = fabco::BuildDataset(data);
      fabco::SpeedAudit audit = fabco::AuditSpeedBound(dataset, cfg.env.limits);
      fabco::WriteJsonFile(fs::path(collect_out) / "robot_manifest.json",
                           fabco::DatasetManifest(dataset, audit));
      std::cout << "wrote " << data.size() << " trajectories ("
                << dataset.transitions.size() << " transitions) to "
                << collect_out << "\n";
      return audit.ok ? 0 : 1;
    }

    if (*train_dyn) {
      std::vector<fabco::Trajectory> data;
      if (dyn_data.empty()) {
        Log(g, "no --data given; collecting robot data");
        data = fabco::CollectRobotData(cfg, seed);
      } else {
        data = fabco::ReadTrajectoriesJsonl(dyn_data);
      }
      fabco::DynModels dyn = fabco::TrainDynamics(cfg, data, seed);
      fabco::SaveDynModels(dyn, dyn_out);
      std::printf("idm best val loss %.6g\nfdm best val loss %.6g\n",
                  dyn.idm.checkpoint().best_val_loss,
                  dyn.fdm.checkpoint().best_val_loss);
      return 0;
    }

    if (*session_cmd) {
      if (fb == no_fb) throw CLI::ValidationError("give exactly one of --fb/--no-fb");
      if (synthetic == !from_dir.empty()) {
        throw CLI::ValidationError("give exactly one of --synthetic/--from-dir");
      }
      fabco::DynModels dyn = fabco::LoadDynModels(models_dir);
      fabco::DemoSession session;
      if (synthetic) {
        fabco::SynthDemoConfig sc = fb ? cfg.session_fb : cfg.session_no_fb;
        if (speed) sc.speed_multiplier = *speed;
        if (adaptation) sc.adaptation_rate = *adaptation;
        sc.feedback_enabled = fb;
        sc.rng_seed = seed;
        session = fabco::RunSession(sc, n_demos.value_or(cfg.n_demos), dyn.idm,
                                    dyn.fdm, cfg.sigma_w, cfg.env);
      } else {
        session.demonstrator_id = fs::path(from_dir).filename().string();
        session.feedback_enabled = fb;
        session.demos =
            fabco::ReadTrajectoriesJsonl(fs::path(from_dir) / "demos.jsonl");
        if (fb) {
          session.profiles.emplace();
          for (const auto& d : session.demos) {
            session.profiles->push_back(fabco::ComputeFeasibilityProfile(
                dyn.fdm, dyn.idm, d, cfg.sigma_w));
          }
        }
      }
      fabco::SaveSession(session, session_out);
      fabco::SessionSummary summary =
          fabco::SummarizeSession(session, dyn, cfg.sigma_w);
      std::printf("%zu demos, mean feasibility first %.3f last %.3f, change %+.3f\n",
                  session.demos.size(), summary.mean_feasibility.front(),
                  summary.mean_feasibility.back(), summary.improvement);
      return 0;
    }

    if (*score) {
      fabco::DynModels dyn = fabco::LoadDynModels(score_models);
      auto demos = fabco::ReadTrajectoriesJsonl(score_demos);
      if (!score_out.empty()) fs::create_directories(score_out);
      for (const auto& d : demos) {
        fabco::FeasibilityProfile p =
            fabco::ComputeFeasibilityProfile(dyn.fdm, dyn.idm, d, cfg.sigma_w);
        std::printf("%-24s mean %.4f min %.4f\n", d.id.c_str(), p.mean, p.min);
        if (!score_out.empty()) {
          fabco::ColorMapPayload payload = fabco::Colorize(p, d);
          fabco::WriteJsonFile(fs::path(score_out) / ("profile_" + d.id + ".json"),
                               fabco::ProfileToJson(p));
          fabco::WriteJsonFile(fs::path(score_out) / ("colormap_" + d.id + ".json"),
                               fabco::ColorMapToJson(payload));
          if (score_svg) {
            fabco::WriteTextFile(
                fs::path(score_out) / ("colormap_" + d.id + ".svg"),
                fabco::ColorMapToSvg(payload, d.states.front().obs));
          }
        }
      }
      if (!sigmas.empty()) {
        json sweep = json::array();
        std::printf("\nsigma_w   mean feasibility\n");
        for (const auto& pt : fabco::SweepSigma(dyn.fdm, dyn.idm, demos, sigmas)) {
          std::printf("%-9.4g %.4f\n", pt.sigma_w, pt.mean_feasibility);
          sweep.push_back({{"sigma_w", pt.sigma_w},
                           {"mean_feasibility", pt.mean_feasibility}});
        }
        if (!score_out.empty()) {
          fabco::WriteJsonFile(fs::path(score_out) / "sigma_sweep.json", sweep);
        }
      }
      return 0;
    }

    if (*train_pol) {
      fabco::PolicyVariant variant = fabco::PolicyVariantFromString(variant_name);
      const std::string& dir =
          fabco::UsesFeedbackDemos(variant) ? fb_session : no_fb_session;
      if (dir.empty()) {
        throw CLI::ValidationError(std::string("variant ") + variant_name +
                                   " needs " +
                                   (fabco::UsesFeedbackDemos(variant)
                                        ? "--fb-session"
                                        : "--no-fb-session"));
      }
      fabco::DynModels dyn = fabco::LoadDynModels(pol_models);
      fabco::SessionPair sessions;
      (fabco::UsesFeedbackDemos(variant) ? sessions.fb : sessions.no_fb) =
          fabco::LoadSession(dir);
      fabco::PolicyModel model =
          fabco::TrainVariant(cfg, variant, sessions, dyn, seed);
      fabco::WriteJsonFile(pol_out, model.ToJson());
      std::printf("wrote %s (%s, best val loss %.6g)\n", pol_out.c_str(),
                  variant_name.c_str(), model.checkpoint().best_val_loss);
      return 0;
    }

    if (*evaluate) {
      fabco::PolicyModel policy =
          fabco::PolicyModel::FromJson(fabco::ReadJsonFile(eval_policy));
      fabco::EvalReport report = fabco::EvaluatePolicy(
          policy, cfg, eval_n.value_or(cfg.n_eval_rollouts), seed);
      if (!eval_out.empty()) {
        fabco::WriteJsonFile(eval_out, fabco::EvalReportToJson(report));
      }
      std::printf("%s: %s\n", fabco::DisplayName(policy.variant()).c_str(),
                  fabco::FormatRate(report.successes, report.n_rollouts).c_str());
      return 0;
    }

    if (*ablation) {
      fabco::ExperimentReport report =
          fabco::RunAblation(cfg, ablation_out, Progress(g));
      std::cout << fabco::ReportTable(report);
      return 0;
    }

    if (*serve) {
#ifdef FABCO_WITH_SERVICE
      fabco::ServiceOptions options;
      options.host = host;
      options.port = static_cast<std::uint16_t>(port);
      options.work_dir = serve_dir;
      options.pace_ms = pace_ms;
      options.config = fabco::ConfigToJson(cfg);
      // handle shutdown signals synchronously on the main thread
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      fabco::Service service(options);
      service.Start();
      std::printf("listening on http://%s:%u\n", host.c_str(), service.port());
      std::fflush(stdout);
      int received = 0;
      sigwait(&signals, &received);
      service.Stop();
      return 0;
#else
      std::cerr << "built without the service\n";
      return 2;
#endif
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
