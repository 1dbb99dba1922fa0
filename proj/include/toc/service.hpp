#pragma once

// Session backend for the interactive diagnosis tool. Handlers are plain
// member functions returning status + JSON so they can be tested without a
// socket; mount_routes() binds them to an HTTP server.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "toc/checkpoint.hpp"
#include "toc/diagnosis_sim.hpp"

namespace httplib {
class Server;
}

namespace toc {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct ServiceOptions {
  // JSONL file that finished sessions are appended to; empty disables
  // persistence.
  std::string data_out;
  std::uint64_t master_seed = 0;
};

class DiagnosisService {
 public:
  DiagnosisService(RobotConfig config, ServiceOptions options);
  DiagnosisService(const DiagnosisService&) = delete;
  DiagnosisService& operator=(const DiagnosisService&) = delete;

  /// Installs a model; throws ModelError if its vocabulary does not match.
  void load_model(Checkpoint checkpoint);
  bool model_loaded() const { return model_.has_value(); }
  const RobotConfig& config() const { return config_; }

  ApiResponse create_session(const std::string& body);
  ApiResponse reveal(const std::string& session_id, const std::string& body);
  ApiResponse action(const std::string& session_id, const std::string& body);
  ApiResponse suggest(const std::string& session_id);
  ApiResponse finish(const std::string& session_id);
  ApiResponse taxonomy() const;

  std::size_t live_sessions() const;

 private:
  struct Entry {
    std::mutex mutex;
    Session session;
    std::int64_t created_at = 0;
    Entry(const RobotConfig& config, const std::string& fault, std::uint64_t seed,
          std::string id)
        : session(config, fault, seed, std::move(id)) {}
  };

  std::shared_ptr<Entry> find(const std::string& session_id) const;

  RobotConfig config_;
  ServiceOptions options_;
  std::unique_ptr<SequenceCodec> codec_;
  std::optional<Checkpoint> model_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_session_ = 0;
  Rng fault_picker_;

  std::mutex persist_mutex_;
};

/// Registers the /api routes and permissive CORS headers.
void mount_routes(httplib::Server& server, DiagnosisService& service);

}  // namespace toc
