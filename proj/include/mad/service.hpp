// SPDX-License-Identifier: Apache-2.0
//
// Stateful inference sessions and their HTTP front end.
//
//   POST   /api/sessions              -> 201 {"session_id": ...}
//   POST   /api/sessions/{id}/turns   {"utterance": ...} -> 200 TurnResult
//   GET    /api/sessions/{id}         -> 200 transcript
//   DELETE /api/sessions/{id}         -> 204
//   GET    /api/model                 -> 200 ontology and dimensions
//   GET    /api/docs                  -> API reference (HTML)
//   GET    /*                         -> static UI bundle, when configured
#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"

#include "mad/error.hpp"
#include "mad/model.hpp"

namespace httplib {
class Server;
}

namespace mad {

/// Error carrying the HTTP status it maps to.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServiceOptions {
  std::chrono::seconds ttl{30 * 60};
  std::size_t max_body_bytes = 8 * 1024;
  std::size_t top_k = 3;
  std::string static_dir;  // empty: no UI bundle
};

/// TurnResult payload for one step. Numbers are written at full double
/// precision.
nlohmann::ordered_json turn_result_json(const Model& model, std::size_t turn,
                                        const std::string& user,
                                        const std::string& system_prev,
                                        const TurnTrace& trace, std::size_t top_k);

nlohmann::ordered_json model_info_json(const Model& model);

class SessionManager {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  SessionManager(std::shared_ptr<const Model> model, ServiceOptions options = {},
                 Clock clock = {});

  std::string create();
  /// Advances the session by one controller step. Throws ServiceError 404
  /// for unknown sessions and 400 for empty utterances.
  nlohmann::ordered_json submit(const std::string& id, const std::string& utterance);
  nlohmann::ordered_json transcript(const std::string& id);
  void remove(const std::string& id);
  nlohmann::ordered_json model_info() const { return model_info_json(*model_); }

  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t expire_idle();
  std::size_t size() const;
  const ServiceOptions& options() const { return options_; }

 private:
  struct Entry {
    std::mutex mutex;
    DialogueMemoryState state;
    std::string last_system;
    nlohmann::ordered_json turns = nlohmann::ordered_json::array();
    std::chrono::steady_clock::time_point touched;
  };

  std::shared_ptr<Entry> find(const std::string& id);

  std::shared_ptr<const Model> model_;
  ServiceOptions options_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_;
};

/// Registers every endpoint on `server`.
void install_routes(httplib::Server& server, SessionManager& sessions);

/// Blocks serving on host:port until the server is stopped.
void serve(SessionManager& sessions, const std::string& host, int port);

}  // namespace mad
