#ifndef FABCO_DYNAMICS_H_
#define FABCO_DYNAMICS_H_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabco/nn.h"
#include "fabco/sim_world.h"

namespace fabco {

struct Transition {
  Pose prev;  // p_{t-1}; equals `pose` for the first transition of a trajectory
  Pose pose;
  Pose next;
  Action action;
};

struct DynDataset {
  std::vector<Transition> transitions;
  std::vector<std::string> provenance;  // trajectory ids, in order
  double dt = 0.1;
};

// Flattens robot trajectories into transitions in input order. Throws on an
// empty list, a trajectory without actions (naming it) or a non-robot source.
DynDataset BuildDataset(const std::vector<Trajectory>& trajectories);

struct SpeedAudit {
  bool ok = true;
  int violations = 0;
  double worst_ratio = 0.0;  // max |dp_i| / (max_speed_i * dt)
};
SpeedAudit AuditSpeedBound(const DynDataset& data, const RobotLimits& limits,
                           double tolerance = 1e-9);

nlohmann::json DatasetManifest(const DynDataset& data, const SpeedAudit& audit);

enum class DynKind { kIdm, kFdm };
enum class IdmContext { kTwoPose, kThreePose };

std::string ToString(DynKind kind);
std::string ToString(IdmContext context);
IdmContext IdmContextFromString(const std::string& name);

struct DynModelOptions {
  std::vector<int> hidden = {64, 256, 256, 64};
  IdmContext idm_context = IdmContext::kTwoPose;
};

// A trained inverse or forward dynamics network plus its feature encoding.
//
// Features: poses enter in [0.05, 0.95]; displacements p_{t+1} - p_t are
// scaled by the largest displacement seen in training so one robot step maps
// onto the same range. The FDM head predicts the displacement, so its output
// can never exceed roughly one robot step.
class DynModel {
 public:
  DynModel(DynKind kind, IdmContext context, nn::Checkpoint checkpoint);

  DynKind kind() const { return kind_; }
  IdmContext idm_context() const { return context_; }
  const nn::Checkpoint& checkpoint() const { return checkpoint_; }
  const std::array<double, 3>& step_scale() const { return step_scale_; }

  // IDM only. Clipped to [-1, 1]. `prev` is used by the three-pose context
  // and defaults to `pose`.
  Action PredictAction(const Pose& pose, const Pose& next,
                       const std::optional<Pose>& prev = std::nullopt) const;
  // FDM only. Clamped to the workspace.
  Pose PredictPose(const Pose& pose, const Action& action) const;

  // batched forms; PredictActions treats every pair as a sequence start,
  // PredictActionsAlong walks consecutive pairs of one path
  std::vector<Action> PredictActions(const std::vector<Pose>& poses,
                                     const std::vector<Pose>& nexts) const;
  std::vector<Action> PredictActionsAlong(const std::vector<Pose>& path) const;
  std::vector<Pose> PredictPoses(const std::vector<Pose>& poses,
                                 const std::vector<Action>& actions) const;

  nlohmann::json ToJson() const;
  static DynModel FromJson(const nlohmann::json& j);

 private:
  std::vector<Action> PredictBatch(const std::vector<Pose>& prevs,
                                   const std::vector<Pose>& poses,
                                   const std::vector<Pose>& nexts) const;

  DynKind kind_;
  IdmContext context_;
  nn::Checkpoint checkpoint_;
  nn::Network network_;
  std::array<double, 3> step_scale_;
};

DynModel TrainIdm(const DynDataset& data, const nn::TrainConfig& cfg,
                  const DynModelOptions& options = {});
DynModel TrainFdm(const DynDataset& data, const nn::TrainConfig& cfg,
                  const DynModelOptions& options = {});

}  // namespace fabco

#endif  // FABCO_DYNAMICS_H_
