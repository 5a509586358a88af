#ifndef FABCO_TRAJECTORY_IO_H_
#define FABCO_TRAJECTORY_IO_H_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabco/sim_world.h"

namespace fabco {

// JSONL record layout:
// {id, source, dt, states:[{x,y,theta,slot:{x,y,theta,half_width}}],
//  actions:[[vx,vy,vtheta]]}
nlohmann::json TrajectoryToJson(const Trajectory& trajectory);
Trajectory TrajectoryFromJson(const nlohmann::json& j);

void WriteTrajectoriesJsonl(const std::filesystem::path& path,
                            const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> ReadTrajectoriesJsonl(
    const std::filesystem::path& path);

// Throws if the trajectory breaks a structural invariant (length, action
// count, static slot, finite values).
void ValidateTrajectory(const Trajectory& trajectory);

nlohmann::json PoseToJson(const Pose& pose);
Pose PoseFromJson(const nlohmann::json& j);

// Whole-file helpers shared by the pipeline, CLI and service.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);

// 64-bit FNV-1a, hex encoded. Used for provenance and stage cache keys.
std::string Fnv1aHex(const std::string& bytes);

}  // namespace fabco

#endif  // FABCO_TRAJECTORY_IO_H_
