#ifndef FABCO_FEASIBILITY_H_
#define FABCO_FEASIBILITY_H_

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabco/dynamics.h"
#include "fabco/sim_world.h"

namespace fabco {

inline constexpr double kDefaultSigmaW = 0.15;

struct FeasibilityStep {
  double weight = 1.0;
  double roundtrip_error = 0.0;
};

// w = exp(-e / (2 sigma_w^2)), kept strictly positive.
double FeasibilityFromError(double roundtrip_error, double sigma_w);

// e = |FDM(p_t, IDM(p_t, p_next)) - p_next|_1 in normalized pose units.
FeasibilityStep ComputeFeasibilityStep(const DynModel& fdm, const DynModel& idm,
                                       const Pose& pose, const Pose& next,
                                       double sigma_w);

struct FeasibilityProfile {
  std::string traj_id;
  double sigma_w = kDefaultSigmaW;
  std::vector<double> weights;  // T - 1 entries, each in (0, 1]
  std::vector<double> errors;
  // arithmetic mean of the per-step weights (per-demonstration aggregate)
  double mean = 0.0;
  double min = 0.0;
};

FeasibilityProfile ComputeFeasibilityProfile(const DynModel& fdm,
                                             const DynModel& idm,
                                             const Trajectory& trajectory,
                                             double sigma_w);

// Rebuilds mean/min from the stored weights.
void RecomputeAggregates(FeasibilityProfile& profile);

nlohmann::json ProfileToJson(const FeasibilityProfile& profile);
FeasibilityProfile ProfileFromJson(const nlohmann::json& j);

struct Rgb {
  int r = 0;
  int g = 0;
  int b = 0;
  bool operator==(const Rgb&) const = default;
};

// Fixed two-colour gradient: w = 0 -> low, w = 1 -> high.
inline constexpr Rgb kLowFeasibilityColor = {220, 40, 40};
inline constexpr Rgb kHighFeasibilityColor = {40, 190, 80};

Rgb FeasibilityColor(double weight);
std::string ToHex(const Rgb& color);

struct ColorMapPayload {
  std::string traj_id;
  std::vector<Pose> polyline;         // T demonstrated poses
  std::vector<double> weights;        // T - 1
  std::vector<Rgb> segment_colors;    // T - 1
};

ColorMapPayload Colorize(const FeasibilityProfile& profile,
                         const Trajectory& trajectory);
nlohmann::json ColorMapToJson(const ColorMapPayload& payload);

// Minimal static plot of a colour-mapped demonstration.
std::string ColorMapToSvg(const ColorMapPayload& payload,
                          const EnvObservation& obs, int size_px = 480);

struct SigmaSweepPoint {
  double sigma_w = 0.0;
  double mean_feasibility = 0.0;
};

// Mean of per-demonstration mean feasibility for each sigma_w.
std::vector<SigmaSweepPoint> SweepSigma(const DynModel& fdm,
                                        const DynModel& idm,
                                        const std::vector<Trajectory>& demos,
                                        const std::vector<double>& sigmas);

}  // namespace fabco

#endif  // FABCO_FEASIBILITY_H_
