#include "fabco/trajectory_io.h"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fabco {

using nlohmann::json;

json PoseToJson(const Pose& pose) {
  return json{{"x", pose.x}, {"y", pose.y}, {"theta", pose.theta}};
}

Pose PoseFromJson(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(),
          j.at("theta").get<double>()};
}

json TrajectoryToJson(const Trajectory& trajectory) {
  json states = json::array();
  for (const State& s : trajectory.states) {
    json slot = PoseToJson(s.obs.slot_pose);
    slot["half_width"] = s.obs.slot_half_width;
    json state = PoseToJson(s.pose);
    state["slot"] = std::move(slot);
    states.push_back(std::move(state));
  }
  json actions = json::array();
  if (trajectory.actions) {
    for (const Action& a : *trajectory.actions) {
      actions.push_back({a.vx, a.vy, a.vtheta});
    }
  }
  return json{{"id", trajectory.id},
              {"source", std::string(ToString(trajectory.source))},
              {"dt", trajectory.dt},
              {"states", std::move(states)},
              {"actions", std::move(actions)}};
}

Trajectory TrajectoryFromJson(const json& j) {
  Trajectory traj;
  traj.id = j.at("id").get<std::string>();
  traj.source = TrajectorySourceFromString(j.at("source").get<std::string>());
  traj.dt = j.at("dt").get<double>();
  for (const json& s : j.at("states")) {
    State state;
    state.pose = PoseFromJson(s);
    const json& slot = s.at("slot");
    state.obs.slot_pose = PoseFromJson(slot);
    state.obs.slot_half_width = slot.at("half_width").get<double>();
    traj.states.push_back(state);
  }
  // an empty action list means observation-only data
  if (j.contains("actions") && !j.at("actions").empty()) {
    traj.actions.emplace();
    for (const json& a : j.at("actions")) {
      if (a.size() != 3) throw std::invalid_argument("action must have 3 components");
      traj.actions->push_back(
          {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()});
    }
  }
  ValidateTrajectory(traj);
  return traj;
}

void ValidateTrajectory(const Trajectory& trajectory) {
  const std::string& id = trajectory.id;
  if (trajectory.states.size() < 2) {
    throw std::invalid_argument("trajectory " + id + " has fewer than 2 states");
  }
  if (!(trajectory.dt > 0.0)) {
    throw std::invalid_argument("trajectory " + id + " has non-positive dt");
  }
  if (trajectory.actions &&
      trajectory.actions->size() != trajectory.states.size() - 1) {
    throw std::invalid_argument("trajectory " + id +
                                " action count != state count - 1");
  }
  const EnvObservation& obs = trajectory.states.front().obs;
  for (const State& s : trajectory.states) {
    if (!(s.obs == obs)) {
      throw std::invalid_argument("trajectory " + id +
                                  " has a non-static slot observation");
    }
    for (int i = 0; i < kPoseDim; ++i) {
      if (!std::isfinite(s.pose[i])) {
        throw std::invalid_argument("trajectory " + id + " has non-finite pose");
      }
    }
  }
}

void WriteTrajectoriesJsonl(const std::filesystem::path& path,
                            const std::vector<Trajectory>& trajectories) {
  std::string out;
  for (const Trajectory& t : trajectories) {
    out += TrajectoryToJson(t).dump();
    out += '\n';
  }
  WriteTextFile(path, out);
}

std::vector<Trajectory> ReadTrajectoriesJsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(TrajectoryFromJson(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" +
                               std::to_string(line_number) + ": " + e.what());
    }
  }
  return out;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  // write-then-rename so readers never observe a partial file
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

json ReadJsonFile(const std::filesystem::path& path) {
  return json::parse(ReadTextFile(path));
}

void WriteJsonFile(const std::filesystem::path& path, const json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

std::string Fnv1aHex(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  static const char* kDigits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[hash & 0xf];
    hash >>= 4;
  }
  return out;
}

}  // namespace fabco
