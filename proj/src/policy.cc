#include "fabco/policy.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fabco/feasibility.h"

namespace fabco {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd RawStateFeatures(const State& state) {
  VectorXd v(kPolicyInputDim);
  v << state.pose.x, state.pose.y, state.pose.theta, state.obs.slot_pose.x,
      state.obs.slot_pose.y, state.obs.slot_pose.theta,
      state.obs.slot_half_width;
  return v;
}

nn::AffineMap PolicyInputMap() {
  VectorXd lo = VectorXd::Zero(kPolicyInputDim);
  VectorXd hi = VectorXd::Ones(kPolicyInputDim);
  hi(6) = 0.1;
  return nn::AffineMap::ToUnitMargin(lo, hi);
}

nn::NetSpec PolicySpec(const PolicyOptions& options) {
  nn::NetSpec spec;
  spec.layer_widths.push_back(kPolicyInputDim);
  spec.layer_widths.insert(spec.layer_widths.end(), options.hidden.begin(),
                           options.hidden.end());
  spec.layer_widths.push_back(kActionDim);
  spec.output_activation = nn::OutputActivation::kIdentity;
  return spec;
}

std::vector<nn::Sample> ToSamples(const nn::AffineMap& input_map,
                                  const std::vector<StateActionPair>& pairs,
                                  const std::vector<double>& weights) {
  std::vector<nn::Sample> samples;
  samples.reserve(pairs.size());
  for (size_t k = 0; k < pairs.size(); ++k) {
    nn::Sample s;
    s.input = input_map.Apply(RawStateFeatures(pairs[k].state));
    s.target = VectorXd(kActionDim);
    for (int i = 0; i < kActionDim; ++i) s.target(i) = pairs[k].action[i];
    s.weight = weights[k];
    samples.push_back(std::move(s));
  }
  return samples;
}

PolicyTrainResult Fit(PolicyVariant variant,
                      const std::vector<StateActionPair>& pairs,
                      const std::vector<double>& weights,
                      const nn::TrainConfig& cfg, const PolicyOptions& options,
                      const nn::Objective& objective) {
  if (pairs.empty()) throw std::invalid_argument("policy training set is empty");
  nn::Checkpoint ckpt;
  ckpt.spec = PolicySpec(options);
  ckpt.input_map = PolicyInputMap();
  ckpt.output_map = nn::AffineMap::Identity(kActionDim);
  nn::TrainResult result =
      nn::Train(ckpt.spec, ToSamples(ckpt.input_map, pairs, weights), cfg,
                objective);
  ckpt.params = std::move(result.params);
  ckpt.best_val_loss = result.best_val_loss;
  ckpt.meta = {{"kind", "policy"},
               {"variant", ToString(variant)},
               {"best_epoch", result.best_epoch},
               {"n_records", pairs.size()}};
  return {PolicyModel(variant, std::move(ckpt)), std::move(result.train_loss),
          std::move(result.val_loss)};
}

// Moves all components toward `target` so that they arrive together, at
// most one robot step per component.
Action SynchronizedStep(const Pose& current, const Pose& target,
                        const RobotLimits& limits, double dt) {
  const std::array<double, 3> max_step = limits.MaxStep(dt);
  double steps_needed = 0.0;
  for (int i = 0; i < kPoseDim; ++i) {
    steps_needed =
        std::max(steps_needed, std::abs(target[i] - current[i]) / max_step[i]);
  }
  const double stretch = std::max(1.0, steps_needed);
  Action a;
  for (int i = 0; i < kActionDim; ++i) {
    a[i] = (target[i] - current[i]) / (max_step[i] * stretch);
  }
  return ClipAction(a);
}

}  // namespace

std::string ToString(PolicyVariant variant) {
  switch (variant) {
    case PolicyVariant::kFabco:
      return "fabco";
    case PolicyVariant::kFabcoNoWeight:
      return "fabco_no_weight";
    case PolicyVariant::kFabcoNoFb:
      return "fabco_no_fb";
    case PolicyVariant::kBco:
      return "bco";
  }
  return "unknown";
}

PolicyVariant PolicyVariantFromString(const std::string& name) {
  for (PolicyVariant v : kAllVariants) {
    if (ToString(v) == name) return v;
  }
  throw std::invalid_argument("unknown policy variant: " + name);
}

std::string DisplayName(PolicyVariant variant) {
  switch (variant) {
    case PolicyVariant::kFabco:
      return "FABCO";
    case PolicyVariant::kFabcoNoWeight:
      return "FABCO w/o weighting";
    case PolicyVariant::kFabcoNoFb:
      return "FABCO w/o FB";
    case PolicyVariant::kBco:
      return "BCO";
  }
  return "unknown";
}

bool UsesFeedbackDemos(PolicyVariant variant) {
  return variant == PolicyVariant::kFabco ||
         variant == PolicyVariant::kFabcoNoWeight;
}

bool UsesFeasibilityWeights(PolicyVariant variant) {
  return variant == PolicyVariant::kFabco ||
         variant == PolicyVariant::kFabcoNoFb;
}

WeightedDemoSet BuildWeightedSet(const std::vector<Trajectory>& demos,
                                 const DynModel& idm, const DynModel& fdm,
                                 double sigma_w, bool weighted) {
  if (demos.empty()) throw std::invalid_argument("BuildWeightedSet: no demos");
  if (idm.kind() != DynKind::kIdm || fdm.kind() != DynKind::kFdm) {
    throw std::invalid_argument("BuildWeightedSet: expected an IDM and an FDM");
  }
  WeightedDemoSet set;
  for (const Trajectory& demo : demos) {
    if (demo.states.size() < 2) {
      throw std::invalid_argument("BuildWeightedSet: demonstration " + demo.id +
                                  " has fewer than 2 states");
    }
    std::vector<Pose> path;
    for (const State& s : demo.states) path.push_back(s.pose);
    std::vector<Action> labels = idm.PredictActionsAlong(path);
    std::vector<double> weights(labels.size(), 1.0);
    if (weighted) {
      weights = ComputeFeasibilityProfile(fdm, idm, demo, sigma_w).weights;
    }
    for (size_t t = 0; t < labels.size(); ++t) {
      set.push_back({demo.states[t], labels[t], weights[t], demo.id});
    }
  }
  return set;
}

PolicyModel::PolicyModel(PolicyVariant variant, nn::Checkpoint checkpoint)
    : variant_(variant),
      checkpoint_(std::move(checkpoint)),
      network_(checkpoint_.spec, checkpoint_.params) {
  if (checkpoint_.spec.input_dim() != kPolicyInputDim ||
      checkpoint_.spec.output_dim() != kActionDim) {
    throw std::invalid_argument("PolicyModel: network must map 7 -> 3");
  }
}

Action PolicyModel::Act(const State& state) const {
  VectorXd out = checkpoint_.output_map.Invert(
      network_.Forward(checkpoint_.input_map.Apply(RawStateFeatures(state))));
  return ClipAction({out(0), out(1), out(2)});
}

nlohmann::json PolicyModel::ToJson() const {
  nlohmann::json j = nn::CheckpointToJson(checkpoint_);
  j["meta"]["variant"] = ToString(variant_);
  return j;
}

PolicyModel PolicyModel::FromJson(const nlohmann::json& j) {
  nn::Checkpoint ckpt = nn::CheckpointFromJson(j);
  PolicyVariant variant =
      PolicyVariantFromString(ckpt.meta.at("variant").get<std::string>());
  return PolicyModel(variant, std::move(ckpt));
}

PolicyTrainResult TrainPolicy(const WeightedDemoSet& set,
                              const nn::TrainConfig& cfg, PolicyVariant variant,
                              const PolicyOptions& options) {
  std::vector<StateActionPair> pairs;
  std::vector<double> weights;
  pairs.reserve(set.size());
  weights.reserve(set.size());
  for (const WeightedRecord& r : set) {
    if (!(r.weight >= 0.0 && r.weight <= 1.0)) {
      throw std::invalid_argument("TrainPolicy: weight outside [0, 1] in " +
                                  r.demo_id);
    }
    pairs.push_back({r.state, r.action});
    weights.push_back(r.weight);
  }
  return Fit(variant, pairs, weights, cfg, options, nn::WeightedL1Objective);
}

double UnweightedL1Objective(const nn::Network& net, const MatrixXd& inputs,
                             const MatrixXd& targets,
                             const VectorXd& /*ignored_weights*/, double scale,
                             nn::NetParams* grad) {
  MatrixXd out = net.ForwardBackward(
      inputs,
      [&](const MatrixXd& pred) -> MatrixXd {
        MatrixXd g = (pred - targets).array().sign().matrix();
        g *= scale;
        return g;
      },
      grad);
  double total = 0.0;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    total += (out.col(k) - targets.col(k)).cwiseAbs().sum();
  }
  return scale * total;
}

PolicyTrainResult TrainBcoPolicy(const std::vector<StateActionPair>& pairs,
                                 const nn::TrainConfig& cfg,
                                 const PolicyOptions& options) {
  std::vector<double> unused(pairs.size(), 1.0);
  return Fit(PolicyVariant::kBco, pairs, unused, cfg, options,
             UnweightedL1Objective);
}

RolloutResult Rollout(const Controller& controller, const State& initial,
                      const RobotLimits& limits, double dt, int max_steps,
                      const TaskSpec& task) {
  if (max_steps < 1) throw std::invalid_argument("Rollout: max_steps < 1");
  RolloutResult result;
  Trajectory& traj = result.trajectory;
  traj.source = TrajectorySource::kPolicyRollout;
  traj.dt = dt;
  traj.actions.emplace();
  Simulator sim(initial.pose, limits, dt);
  SuccessMonitor monitor(task);
  State state{sim.pose(), initial.obs};
  traj.states.push_back(state);
  result.success = monitor.Observe(state);
  while (!result.success && static_cast<int>(traj.states.size()) < max_steps) {
    Action applied = sim.Advance(ClipAction(controller(state)));
    state = {sim.pose(), initial.obs};
    traj.actions->push_back(applied);
    traj.states.push_back(state);
    result.success = monitor.Observe(state);
  }
  return result;
}

RolloutResult Rollout(const PolicyModel& policy, const State& initial,
                      const RobotLimits& limits, double dt, int max_steps,
                      const TaskSpec& task) {
  return Rollout([&policy](const State& s) { return policy.Act(s); }, initial,
                 limits, dt, max_steps, task);
}

Controller ScriptedInsertionController(const RobotLimits& limits, double dt,
                                       const TaskSpec& task) {
  return [limits, dt, task](const State& state) {
    const Pose pre = PreInsertionPose(state.obs, task);
    const Pose& p = state.pose;
    constexpr double kAligned = 1e-3;
    bool aligned = std::abs(p.x - pre.x) <= kAligned &&
                   std::abs(p.theta - pre.theta) <= kAligned &&
                   p.y >= pre.y - kAligned;
    return SynchronizedStep(p, aligned ? state.obs.slot_pose : pre, limits, dt);
  };
}

}  // namespace fabco
