#ifndef FABCO_POLICY_H_
#define FABCO_POLICY_H_

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabco/dynamics.h"
#include "fabco/nn.h"
#include "fabco/sim_world.h"

namespace fabco {

// The four ablation arms: {FB demos, no-FB demos} x {weighted, unit weights}.
enum class PolicyVariant { kFabco, kFabcoNoWeight, kFabcoNoFb, kBco };

inline constexpr PolicyVariant kAllVariants[] = {
    PolicyVariant::kFabco, PolicyVariant::kFabcoNoWeight,
    PolicyVariant::kFabcoNoFb, PolicyVariant::kBco};

std::string ToString(PolicyVariant variant);
PolicyVariant PolicyVariantFromString(const std::string& name);
// Table column headers, e.g. "FABCO w/o weighting".
std::string DisplayName(PolicyVariant variant);
bool UsesFeedbackDemos(PolicyVariant variant);
bool UsesFeasibilityWeights(PolicyVariant variant);

inline constexpr int kPolicyInputDim = 7;  // pose, slot pose, slot half width

struct WeightedRecord {
  State state;
  Action action;  // IDM-inferred
  double weight = 1.0;
  std::string demo_id;
};

using WeightedDemoSet = std::vector<WeightedRecord>;

// One record per demonstrated transition: the IDM labels the action and the
// feasibility of the transition becomes its weight (1 when `weighted` is
// false). Demonstrations need no actions.
WeightedDemoSet BuildWeightedSet(const std::vector<Trajectory>& demos,
                                 const DynModel& idm, const DynModel& fdm,
                                 double sigma_w, bool weighted);

struct PolicyOptions {
  std::vector<int> hidden = {256, 128};
};

class PolicyModel {
 public:
  PolicyModel(PolicyVariant variant, nn::Checkpoint checkpoint);

  // Clipped to [-1, 1].
  Action Act(const State& state) const;

  PolicyVariant variant() const { return variant_; }
  const nn::Checkpoint& checkpoint() const { return checkpoint_; }

  nlohmann::json ToJson() const;
  static PolicyModel FromJson(const nlohmann::json& j);

 private:
  PolicyVariant variant_;
  nn::Checkpoint checkpoint_;
  nn::Network network_;
};

struct PolicyTrainResult {
  PolicyModel model;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

// Minimizes sum_t w_t |a~_t - pi(s_t)| with mini-batch Adam; returns the
// best-validation checkpoint.
PolicyTrainResult TrainPolicy(const WeightedDemoSet& set,
                              const nn::TrainConfig& cfg, PolicyVariant variant,
                              const PolicyOptions& options = {});

struct StateActionPair {
  State state;
  Action action;
};

// Plain behaviour cloning from observation: unweighted L1 between IDM labels
// and the policy output. Kept as its own objective so weighted training can
// be checked against it.
PolicyTrainResult TrainBcoPolicy(const std::vector<StateActionPair>& pairs,
                                 const nn::TrainConfig& cfg,
                                 const PolicyOptions& options = {});

double UnweightedL1Objective(const nn::Network& net,
                             const Eigen::MatrixXd& inputs,
                             const Eigen::MatrixXd& targets,
                             const Eigen::VectorXd& ignored_weights,
                             double scale, nn::NetParams* grad);

using Controller = std::function<Action(const State&)>;

struct RolloutResult {
  Trajectory trajectory;
  bool success = false;
};

// Closed loop: a_t = controller(s_t), p_{t+1} = simulator step. Records at
// most max_steps states and stops early on task success.
RolloutResult Rollout(const Controller& controller, const State& initial,
                      const RobotLimits& limits, double dt, int max_steps,
                      const TaskSpec& task);
RolloutResult Rollout(const PolicyModel& policy, const State& initial,
                      const RobotLimits& limits, double dt, int max_steps,
                      const TaskSpec& task);

// Scripted reference controller: aligns at the pre-insertion pose, then
// inserts. Moves every component in proportion so they arrive together.
Controller ScriptedInsertionController(const RobotLimits& limits, double dt,
                                       const TaskSpec& task);

}  // namespace fabco

#endif  // FABCO_POLICY_H_
