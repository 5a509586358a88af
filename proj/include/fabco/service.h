#ifndef FABCO_SERVICE_H_
#define FABCO_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace fabco {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  // 0 picks a free port; see Service::port()
  std::uint16_t port = 8080;
  // models are loaded from and artifacts written to this directory
  std::filesystem::path work_dir = "fabco-work";
  // delay between streamed rollout events
  int pace_ms = 30;
  // base experiment config; job requests are merged on top of it
  nlohmann::json config = nlohmann::json::object();
};

// Local HTTP + WebSocket server for the demonstration loop.
//
//   POST /api/session                    {feedback_enabled}
//   POST /api/demos                      trajectory JSON or {points:[...]}
//   GET  /api/demos/{id}/feasibility
//   GET  /api/session/feasibility-history
//   POST /api/jobs                       {kind, ...config fragment}
//   GET  /api/jobs/{id}
//   POST /api/rollouts                   {policy_id, seed}
//   WS   /ws/rollouts/{id}
//
// Requests are served concurrently; training jobs run one at a time on a
// single executor thread, later submissions wait in a queue.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and starts serving in background threads.
  void Start();
  // Stops accepting, closes open connections and joins the executor.
  void Stop();
  // Blocks until Stop() is called from another thread.
  void Wait();

  std::uint16_t port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fabco

#endif  // FABCO_SERVICE_H_
