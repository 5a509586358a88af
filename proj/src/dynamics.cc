#include "fabco/dynamics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fabco {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kMinStepScale = 1e-6;

int IdmInputDim(IdmContext context) {
  return context == IdmContext::kTwoPose ? 6 : 9;
}

// raw (un-normalized) feature vectors; normalization lives in the checkpoint
void FillIdmFeatures(IdmContext context, const Pose& prev, const Pose& pose,
                     const Pose& next, double* out) {
  int k = 0;
  for (int i = 0; i < 3; ++i) out[k++] = pose[i];
  if (context == IdmContext::kThreePose) {
    for (int i = 0; i < 3; ++i) out[k++] = pose[i] - prev[i];
  }
  for (int i = 0; i < 3; ++i) out[k++] = next[i] - pose[i];
}

void FillFdmFeatures(const Pose& pose, const Action& action, double* out) {
  for (int i = 0; i < 3; ++i) out[i] = pose[i];
  for (int i = 0; i < 3; ++i) out[3 + i] = action[i];
}

std::array<double, 3> StepScale(const DynDataset& data) {
  std::array<double, 3> scale = {kMinStepScale, kMinStepScale, kMinStepScale};
  for (const Transition& tr : data.transitions) {
    for (int i = 0; i < 3; ++i) {
      scale[i] = std::max(scale[i], std::abs(tr.next[i] - tr.pose[i]));
      scale[i] = std::max(scale[i], std::abs(tr.pose[i] - tr.prev[i]));
    }
  }
  return scale;
}

nn::AffineMap IdmInputMap(IdmContext context,
                          const std::array<double, 3>& scale) {
  const int dim = IdmInputDim(context);
  VectorXd lo(dim), hi(dim);
  for (int i = 0; i < 3; ++i) {
    lo(i) = 0.0;
    hi(i) = 1.0;
  }
  for (int k = 3; k < dim; ++k) {
    lo(k) = -scale[k % 3];
    hi(k) = scale[k % 3];
  }
  return nn::AffineMap::ToUnitMargin(lo, hi);
}

nn::AffineMap ActionMap() {
  return nn::AffineMap::ToUnitMargin(VectorXd::Constant(3, -1.0),
                                     VectorXd::Constant(3, 1.0));
}

nn::AffineMap DeltaMap(const std::array<double, 3>& scale) {
  VectorXd lo(3), hi(3);
  for (int i = 0; i < 3; ++i) {
    lo(i) = -scale[i];
    hi(i) = scale[i];
  }
  return nn::AffineMap::ToUnitMargin(lo, hi);
}

nn::AffineMap FdmInputMap() {
  VectorXd lo(6), hi(6);
  lo << 0.0, 0.0, 0.0, -1.0, -1.0, -1.0;
  hi << 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;
  return nn::AffineMap::ToUnitMargin(lo, hi);
}

nn::NetSpec DynSpec(int input_dim, const std::vector<int>& hidden) {
  nn::NetSpec spec;
  spec.layer_widths.push_back(input_dim);
  spec.layer_widths.insert(spec.layer_widths.end(), hidden.begin(),
                           hidden.end());
  spec.layer_widths.push_back(3);
  spec.output_activation = nn::OutputActivation::kSigmoid;
  return spec;
}

nn::Checkpoint FitModel(DynKind kind, IdmContext context,
                        const DynDataset& data, const nn::TrainConfig& cfg,
                        const DynModelOptions& options) {
  if (data.transitions.empty()) {
    throw std::invalid_argument("cannot train a dynamics model on no data");
  }
  const std::array<double, 3> scale = StepScale(data);
  nn::Checkpoint ckpt;
  if (kind == DynKind::kIdm) {
    ckpt.spec = DynSpec(IdmInputDim(context), options.hidden);
    ckpt.input_map = IdmInputMap(context, scale);
    ckpt.output_map = ActionMap();
  } else {
    ckpt.spec = DynSpec(6, options.hidden);
    ckpt.input_map = FdmInputMap();
    ckpt.output_map = DeltaMap(scale);
  }

  std::vector<nn::Sample> samples;
  samples.reserve(data.transitions.size());
  VectorXd raw(ckpt.spec.input_dim());
  for (const Transition& tr : data.transitions) {
    nn::Sample s;
    if (kind == DynKind::kIdm) {
      FillIdmFeatures(context, tr.prev, tr.pose, tr.next, raw.data());
      VectorXd target(3);
      for (int i = 0; i < 3; ++i) target(i) = tr.action[i];
      s.target = ckpt.output_map.Apply(target);
    } else {
      FillFdmFeatures(tr.pose, tr.action, raw.data());
      VectorXd delta(3);
      for (int i = 0; i < 3; ++i) delta(i) = tr.next[i] - tr.pose[i];
      s.target = ckpt.output_map.Apply(delta);
    }
    s.input = ckpt.input_map.Apply(raw);
    samples.push_back(std::move(s));
  }
  nn::TrainResult result = nn::Train(ckpt.spec, samples, cfg);
  ckpt.params = std::move(result.params);
  ckpt.best_val_loss = result.best_val_loss;
  ckpt.meta = {{"kind", ToString(kind)},
               {"idm_context", ToString(context)},
               {"step_scale", scale},
               {"best_epoch", result.best_epoch},
               {"train_loss", result.train_loss},
               {"val_loss", result.val_loss},
               {"n_transitions", data.transitions.size()}};
  return ckpt;
}

}  // namespace

DynDataset BuildDataset(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) {
    throw std::invalid_argument("BuildDataset: no trajectories");
  }
  DynDataset data;
  data.dt = trajectories.front().dt;
  for (const Trajectory& traj : trajectories) {
    if (!traj.actions) {
      throw std::invalid_argument("BuildDataset: trajectory " + traj.id +
                                  " has no actions");
    }
    if (traj.source != TrajectorySource::kRobotRandom) {
      throw std::invalid_argument("BuildDataset: trajectory " + traj.id +
                                  " is not robot_random data");
    }
    if (traj.actions->size() + 1 != traj.states.size()) {
      throw std::invalid_argument("BuildDataset: trajectory " + traj.id +
                                  " has inconsistent action count");
    }
    for (size_t t = 0; t + 1 < traj.states.size(); ++t) {
      Transition tr;
      tr.pose = traj.states[t].pose;
      tr.prev = t == 0 ? tr.pose : traj.states[t - 1].pose;
      tr.next = traj.states[t + 1].pose;
      tr.action = (*traj.actions)[t];
      data.transitions.push_back(tr);
    }
    data.provenance.push_back(traj.id);
  }
  return data;
}

SpeedAudit AuditSpeedBound(const DynDataset& data, const RobotLimits& limits,
                           double tolerance) {
  SpeedAudit audit;
  const std::array<double, 3> bound = limits.MaxStep(data.dt);
  for (const Transition& tr : data.transitions) {
    bool violated = false;
    for (int i = 0; i < 3; ++i) {
      double d = std::abs(tr.next[i] - tr.pose[i]);
      audit.worst_ratio = std::max(audit.worst_ratio, d / bound[i]);
      if (d > bound[i] + tolerance) violated = true;
    }
    if (violated) ++audit.violations;
  }
  audit.ok = audit.violations == 0;
  return audit;
}

nlohmann::json DatasetManifest(const DynDataset& data, const SpeedAudit& audit) {
  return {{"trajectory_ids", data.provenance},
          {"n_trajectories", data.provenance.size()},
          {"n_transitions", data.transitions.size()},
          {"dt", data.dt},
          {"speed_audit",
           {{"ok", audit.ok},
            {"violations", audit.violations},
            {"worst_ratio", audit.worst_ratio}}}};
}

std::string ToString(DynKind kind) {
  return kind == DynKind::kIdm ? "IDM" : "FDM";
}

std::string ToString(IdmContext context) {
  return context == IdmContext::kTwoPose ? "two_pose" : "three_pose";
}

IdmContext IdmContextFromString(const std::string& name) {
  if (name == "two_pose") return IdmContext::kTwoPose;
  if (name == "three_pose") return IdmContext::kThreePose;
  throw std::invalid_argument("unknown idm_context: " + name);
}

DynModel::DynModel(DynKind kind, IdmContext context, nn::Checkpoint checkpoint)
    : kind_(kind),
      context_(context),
      checkpoint_(std::move(checkpoint)),
      network_(checkpoint_.spec, checkpoint_.params) {
  const int expected_in = kind == DynKind::kIdm ? IdmInputDim(context) : 6;
  if (checkpoint_.spec.input_dim() != expected_in ||
      checkpoint_.spec.output_dim() != 3) {
    throw std::invalid_argument("DynModel: network widths do not match " +
                                ToString(kind));
  }
  step_scale_ = checkpoint_.meta.at("step_scale").get<std::array<double, 3>>();
}

Action DynModel::PredictAction(const Pose& pose, const Pose& next,
                               const std::optional<Pose>& prev) const {
  if (kind_ != DynKind::kIdm) {
    throw std::logic_error("PredictAction requires an IDM");
  }
  VectorXd raw(checkpoint_.spec.input_dim());
  FillIdmFeatures(context_, prev.value_or(pose), pose, next, raw.data());
  VectorXd out = checkpoint_.output_map.Invert(
      network_.Forward(checkpoint_.input_map.Apply(raw)));
  return ClipAction({out(0), out(1), out(2)});
}

Pose DynModel::PredictPose(const Pose& pose, const Action& action) const {
  if (kind_ != DynKind::kFdm) {
    throw std::logic_error("PredictPose requires an FDM");
  }
  VectorXd raw(6);
  FillFdmFeatures(pose, action, raw.data());
  VectorXd delta = checkpoint_.output_map.Invert(
      network_.Forward(checkpoint_.input_map.Apply(raw)));
  return ClampWorkspace(
      {pose.x + delta(0), pose.y + delta(1), pose.theta + delta(2)});
}

std::vector<Action> DynModel::PredictActions(
    const std::vector<Pose>& poses, const std::vector<Pose>& nexts) const {
  if (poses.size() != nexts.size()) {
    throw std::invalid_argument("PredictActions: size mismatch");
  }
  return PredictBatch(poses, poses, nexts);
}

std::vector<Action> DynModel::PredictActionsAlong(
    const std::vector<Pose>& path) const {
  if (path.size() < 2) return {};
  std::vector<Pose> prevs(path.begin(), path.end() - 1);
  std::vector<Pose> poses(path.begin(), path.end() - 1);
  std::vector<Pose> nexts(path.begin() + 1, path.end());
  for (size_t t = 1; t < prevs.size(); ++t) prevs[t] = path[t - 1];
  return PredictBatch(prevs, poses, nexts);
}

std::vector<Action> DynModel::PredictBatch(const std::vector<Pose>& prevs,
                                           const std::vector<Pose>& poses,
                                           const std::vector<Pose>& nexts) const {
  if (kind_ != DynKind::kIdm) {
    throw std::logic_error("PredictActions requires an IDM");
  }
  const int n = static_cast<int>(poses.size());
  MatrixXd raw(checkpoint_.spec.input_dim(), n);
  for (int k = 0; k < n; ++k) {
    FillIdmFeatures(context_, prevs[k], poses[k], nexts[k], raw.col(k).data());
  }
  MatrixXd out = checkpoint_.output_map.InvertColumns(
      network_.ForwardBatch(checkpoint_.input_map.ApplyColumns(raw)));
  std::vector<Action> actions(n);
  for (int k = 0; k < n; ++k) {
    actions[k] = ClipAction({out(0, k), out(1, k), out(2, k)});
  }
  return actions;
}

std::vector<Pose> DynModel::PredictPoses(
    const std::vector<Pose>& poses, const std::vector<Action>& actions) const {
  if (kind_ != DynKind::kFdm) {
    throw std::logic_error("PredictPoses requires an FDM");
  }
  if (poses.size() != actions.size()) {
    throw std::invalid_argument("PredictPoses: size mismatch");
  }
  const int n = static_cast<int>(poses.size());
  MatrixXd raw(6, n);
  for (int k = 0; k < n; ++k) {
    FillFdmFeatures(poses[k], actions[k], raw.col(k).data());
  }
  MatrixXd delta = checkpoint_.output_map.InvertColumns(
      network_.ForwardBatch(checkpoint_.input_map.ApplyColumns(raw)));
  std::vector<Pose> out(n);
  for (int k = 0; k < n; ++k) {
    out[k] = ClampWorkspace({poses[k].x + delta(0, k),
                             poses[k].y + delta(1, k),
                             poses[k].theta + delta(2, k)});
  }
  return out;
}

nlohmann::json DynModel::ToJson() const {
  return nn::CheckpointToJson(checkpoint_);
}

DynModel DynModel::FromJson(const nlohmann::json& j) {
  nn::Checkpoint ckpt = nn::CheckpointFromJson(j);
  const std::string kind = ckpt.meta.at("kind").get<std::string>();
  DynKind k;
  if (kind == "IDM") {
    k = DynKind::kIdm;
  } else if (kind == "FDM") {
    k = DynKind::kFdm;
  } else {
    throw std::invalid_argument("checkpoint is not a dynamics model: " + kind);
  }
  IdmContext context =
      IdmContextFromString(ckpt.meta.at("idm_context").get<std::string>());
  return DynModel(k, context, std::move(ckpt));
}

DynModel TrainIdm(const DynDataset& data, const nn::TrainConfig& cfg,
                  const DynModelOptions& options) {
  return DynModel(DynKind::kIdm, options.idm_context,
                  FitModel(DynKind::kIdm, options.idm_context, data, cfg,
                           options));
}

DynModel TrainFdm(const DynDataset& data, const nn::TrainConfig& cfg,
                  const DynModelOptions& options) {
  return DynModel(DynKind::kFdm, options.idm_context,
                  FitModel(DynKind::kFdm, options.idm_context, data, cfg,
                           options));
}

}  // namespace fabco
