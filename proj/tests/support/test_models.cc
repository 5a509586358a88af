#include "test_models.h"

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <unistd.h>

#include "fabco/trajectory_io.h"

namespace fabco::testing {

ExperimentConfig SmallConfig() {
  ExperimentConfig cfg;
  cfg.seeds = {0};
  cfg.n_robot_trajectories = 200;
  cfg.idm_train.epochs = 40;
  cfg.fdm_train.epochs = 40;
  cfg.dyn_options.hidden = {64, 64};
  cfg.policy_train.epochs = 20;
  cfg.policy_options.hidden = {32, 32};
  cfg.n_demos = 10;
  cfg.n_eval_rollouts = 5;
  return cfg;
}

const DynModels& SharedDynModels() {
  static const std::unique_ptr<DynModels> models = [] {
    const ExperimentConfig cfg = SmallConfig();
    const std::filesystem::path dir =
        std::filesystem::path(FABCO_TEST_CACHE_DIR) /
        ("dyn-" + ConfigHash(cfg));
    if (std::filesystem::exists(dir / kFdmFile)) {
      return std::make_unique<DynModels>(LoadDynModels(dir));
    }
    auto dyn = std::make_unique<DynModels>(
        TrainDynamics(cfg, CollectRobotData(cfg, 0), 0));
    // write next to the final location and rename, so a concurrently running
    // test binary never sees half a model
    const std::filesystem::path tmp =
        dir.string() + ".tmp" + std::to_string(::getpid());
    std::filesystem::create_directories(tmp);
    SaveDynModels(*dyn, tmp);
    std::error_code ec;
    std::filesystem::rename(tmp, dir, ec);
    if (ec) std::filesystem::remove_all(tmp);
    return dyn;
  }();
  return *models;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto stamp =
      std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = std::filesystem::temp_directory_path() /
          ("fabco-test-" + std::to_string(::getpid()) + "-" +
           std::to_string(stamp) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace fabco::testing
