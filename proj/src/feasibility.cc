#include "fabco/feasibility.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fabco {
namespace {

std::vector<double> RoundtripErrors(const DynModel& fdm, const DynModel& idm,
                                    const Trajectory& trajectory) {
  std::vector<Pose> path;
  path.reserve(trajectory.states.size());
  for (const State& s : trajectory.states) path.push_back(s.pose);
  std::vector<Action> actions = idm.PredictActionsAlong(path);
  std::vector<Pose> poses(path.begin(), path.end() - 1);
  std::vector<Pose> predicted = fdm.PredictPoses(poses, actions);
  std::vector<double> errors(predicted.size());
  for (size_t t = 0; t < predicted.size(); ++t) {
    double e = 0.0;
    for (int i = 0; i < kPoseDim; ++i) {
      e += std::abs(predicted[t][i] - path[t + 1][i]);
    }
    errors[t] = e;
  }
  return errors;
}

void CheckModels(const DynModel& fdm, const DynModel& idm) {
  if (fdm.kind() != DynKind::kFdm) {
    throw std::invalid_argument("feasibility: first model must be an FDM");
  }
  if (idm.kind() != DynKind::kIdm) {
    throw std::invalid_argument("feasibility: second model must be an IDM");
  }
}

}  // namespace

double FeasibilityFromError(double roundtrip_error, double sigma_w) {
  if (!(sigma_w > 0.0)) throw std::invalid_argument("sigma_w must be positive");
  if (roundtrip_error < 0.0) {
    throw std::invalid_argument("round-trip error must be non-negative");
  }
  double w = std::exp(-roundtrip_error / (2.0 * sigma_w * sigma_w));
  // (0, 1] even when exp underflows
  return std::max(w, std::numeric_limits<double>::min());
}

FeasibilityStep ComputeFeasibilityStep(const DynModel& fdm, const DynModel& idm,
                                       const Pose& pose, const Pose& next,
                                       double sigma_w) {
  CheckModels(fdm, idm);
  if (!(sigma_w > 0.0)) throw std::invalid_argument("sigma_w must be positive");
  Action action = idm.PredictAction(pose, next);
  Pose predicted = fdm.PredictPose(pose, action);
  double e = 0.0;
  for (int i = 0; i < kPoseDim; ++i) e += std::abs(predicted[i] - next[i]);
  return {FeasibilityFromError(e, sigma_w), e};
}

FeasibilityProfile ComputeFeasibilityProfile(const DynModel& fdm,
                                             const DynModel& idm,
                                             const Trajectory& trajectory,
                                             double sigma_w) {
  CheckModels(fdm, idm);
  if (trajectory.states.size() < 2) {
    throw std::invalid_argument("feasibility profile needs at least 2 states");
  }
  if (!(sigma_w > 0.0)) throw std::invalid_argument("sigma_w must be positive");
  FeasibilityProfile profile;
  profile.traj_id = trajectory.id;
  profile.sigma_w = sigma_w;
  profile.errors = RoundtripErrors(fdm, idm, trajectory);
  profile.weights.reserve(profile.errors.size());
  for (double e : profile.errors) {
    profile.weights.push_back(FeasibilityFromError(e, sigma_w));
  }
  RecomputeAggregates(profile);
  return profile;
}

void RecomputeAggregates(FeasibilityProfile& profile) {
  if (profile.weights.empty()) {
    profile.mean = 0.0;
    profile.min = 0.0;
    return;
  }
  profile.mean =
      std::accumulate(profile.weights.begin(), profile.weights.end(), 0.0) /
      static_cast<double>(profile.weights.size());
  profile.min = *std::min_element(profile.weights.begin(), profile.weights.end());
}

nlohmann::json ProfileToJson(const FeasibilityProfile& profile) {
  return {{"traj_id", profile.traj_id}, {"sigma_w", profile.sigma_w},
          {"weights", profile.weights}, {"errors", profile.errors},
          {"mean", profile.mean},       {"min", profile.min},
          {"aggregate", "mean_per_demonstration"}};
}

FeasibilityProfile ProfileFromJson(const nlohmann::json& j) {
  FeasibilityProfile profile;
  profile.traj_id = j.at("traj_id").get<std::string>();
  profile.sigma_w = j.at("sigma_w").get<double>();
  profile.weights = j.at("weights").get<std::vector<double>>();
  profile.errors = j.at("errors").get<std::vector<double>>();
  if (profile.weights.size() != profile.errors.size()) {
    throw std::invalid_argument("profile weights/errors length mismatch");
  }
  RecomputeAggregates(profile);
  return profile;
}

Rgb FeasibilityColor(double weight) {
  double w = std::clamp(weight, 0.0, 1.0);
  auto lerp = [w](int lo, int hi) {
    return static_cast<int>(std::lround(lo + w * (hi - lo)));
  };
  return {lerp(kLowFeasibilityColor.r, kHighFeasibilityColor.r),
          lerp(kLowFeasibilityColor.g, kHighFeasibilityColor.g),
          lerp(kLowFeasibilityColor.b, kHighFeasibilityColor.b)};
}

std::string ToHex(const Rgb& color) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", color.r, color.g, color.b);
  return buf;
}

ColorMapPayload Colorize(const FeasibilityProfile& profile,
                         const Trajectory& trajectory) {
  if (profile.weights.size() + 1 != trajectory.states.size()) {
    throw std::invalid_argument("Colorize: profile does not match trajectory " +
                                trajectory.id);
  }
  ColorMapPayload payload;
  payload.traj_id = trajectory.id;
  for (const State& s : trajectory.states) payload.polyline.push_back(s.pose);
  payload.weights = profile.weights;
  for (double w : profile.weights) {
    payload.segment_colors.push_back(FeasibilityColor(w));
  }
  return payload;
}

nlohmann::json ColorMapToJson(const ColorMapPayload& payload) {
  nlohmann::json polyline = nlohmann::json::array();
  for (const Pose& p : payload.polyline) polyline.push_back({p.x, p.y, p.theta});
  nlohmann::json segments = nlohmann::json::array();
  for (size_t t = 0; t < payload.segment_colors.size(); ++t) {
    segments.push_back({{"index", t},
                        {"w", payload.weights[t]},
                        {"color", ToHex(payload.segment_colors[t])}});
  }
  return {{"traj_id", payload.traj_id},
          {"polyline", std::move(polyline)},
          {"segments", std::move(segments)},
          {"gradient",
           {{"low", ToHex(kLowFeasibilityColor)},
            {"high", ToHex(kHighFeasibilityColor)},
            {"w_low", 0.0},
            {"w_high", 1.0}}}};
}

std::string ColorMapToSvg(const ColorMapPayload& payload,
                          const EnvObservation& obs, int size_px) {
  const double s = size_px;
  // workspace y points up; SVG y points down
  auto px = [s](double x) { return x * s; };
  auto py = [s](double y) { return (1.0 - y) * s; };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px
      << "\" height=\"" << size_px << "\" viewBox=\"0 0 " << size_px << ' '
      << size_px << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\" stroke=\"#888\"/>\n";
  const Pose& slot = obs.slot_pose;
  svg << "<rect x=\"" << px(slot.x - obs.slot_half_width) << "\" y=\""
      << py(slot.y + obs.slot_half_width) << "\" width=\""
      << px(2 * obs.slot_half_width) << "\" height=\""
      << px(2 * obs.slot_half_width)
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"2\"/>\n";
  for (size_t t = 0; t < payload.segment_colors.size(); ++t) {
    const Pose& a = payload.polyline[t];
    const Pose& b = payload.polyline[t + 1];
    svg << "<line x1=\"" << px(a.x) << "\" y1=\"" << py(a.y) << "\" x2=\""
        << px(b.x) << "\" y2=\"" << py(b.y) << "\" stroke=\""
        << ToHex(payload.segment_colors[t])
        << "\" stroke-width=\"4\" stroke-linecap=\"round\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<SigmaSweepPoint> SweepSigma(const DynModel& fdm,
                                        const DynModel& idm,
                                        const std::vector<Trajectory>& demos,
                                        const std::vector<double>& sigmas) {
  CheckModels(fdm, idm);
  if (demos.empty()) throw std::invalid_argument("SweepSigma: no demonstrations");
  std::vector<std::vector<double>> errors;
  errors.reserve(demos.size());
  for (const Trajectory& demo : demos) {
    if (demo.states.size() < 2) {
      throw std::invalid_argument("SweepSigma: demonstration " + demo.id +
                                  " has fewer than 2 states");
    }
    errors.push_back(RoundtripErrors(fdm, idm, demo));
  }
  std::vector<SigmaSweepPoint> out;
  for (double sigma : sigmas) {
    double total = 0.0;
    for (const std::vector<double>& demo_errors : errors) {
      double sum = 0.0;
      for (double e : demo_errors) sum += FeasibilityFromError(e, sigma);
      total += sum / static_cast<double>(demo_errors.size());
    }
    out.push_back({sigma, total / static_cast<double>(errors.size())});
  }
  return out;
}

}  // namespace fabco
