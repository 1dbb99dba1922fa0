#pragma once

// Live diagnosis sessions against the simulated robot and the logs they
// produce.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "toc/robot_domain.hpp"

namespace toc {

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown fault, sensor or action id.
class UnknownIdError : public SessionError {
 public:
  using SessionError::SessionError;
};

/// Any mutation attempted after the fault has been resolved.
class AlreadyResolvedError : public SessionError {
 public:
  AlreadyResolvedError() : SessionError("session already resolved") {}
};

struct ReadStep {
  std::string sensor_id;
  double value = 0.0;
  bool operator==(const ReadStep&) const = default;
};

struct ActStep {
  std::string action_id;
  bool operator==(const ActStep&) const = default;
};

using Step = std::variant<ReadStep, ActStep>;

inline bool is_read(const Step& step) { return std::holds_alternative<ReadStep>(step); }
inline bool is_act(const Step& step) { return std::holds_alternative<ActStep>(step); }

enum class OperatorKind { synthetic, human, model };

std::string_view to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(std::string_view text);

struct SessionLog {
  std::string session_id;
  std::string fault_id;
  std::vector<Step> steps;
  bool resolved = false;
  OperatorKind operator_kind = OperatorKind::synthetic;
  std::uint64_t seed = 0;
  // Unix seconds; 0 for generated logs. Not part of the JSONL record.
  std::int64_t created_at = 0;

  std::size_t read_count() const;
  std::size_t act_count() const;

  bool operator==(const SessionLog&) const = default;
};

/// Single-owner mutable state of one diagnosis. The config must outlive the
/// session.
class Session {
 public:
  Session(const RobotConfig& config, std::string_view fault_id, std::uint64_t seed,
          std::string session_id = {});

  const RobotConfig& config() const { return *config_; }
  const FaultSpec& fault() const { return *fault_; }
  const std::string& symptom_message() const { return fault_->symptom_message; }
  const std::string& session_id() const { return session_id_; }
  std::uint64_t seed() const { return seed_; }

  /// Draws a fresh noisy reading; every call appends a Read step, including
  /// repeated reveals of the same sensor.
  double reveal_sensor(std::string_view sensor_id);

  /// Applies an action. Wrong actions are logged and otherwise harmless.
  /// Returns the resolved flag after the action.
  bool trigger_action(std::string_view action_id);

  bool resolved() const { return resolved_; }
  const std::vector<Step>& steps() const { return steps_; }
  const std::map<std::string, double>& revealed() const { return revealed_; }
  const std::vector<std::string>& applied_actions() const { return applied_actions_; }

  SessionLog finalize(OperatorKind operator_kind = OperatorKind::synthetic) const;

 private:
  const RobotConfig* config_;
  const FaultSpec* fault_;
  std::string session_id_;
  std::uint64_t seed_;
  Rng rng_;
  std::map<std::string, double> revealed_;
  std::vector<std::string> applied_actions_;
  std::vector<Step> steps_;
  bool resolved_ = false;
};

Session start_session(const RobotConfig& config, std::string_view fault_id, std::uint64_t seed);

/// Feeds the log's steps into a fresh session seeded with the log's seed.
/// Steps after resolution are ignored. Returns the resolved flag.
bool replay_resolves(const RobotConfig& config, const SessionLog& log);

/// (total Act steps) / (total Read steps). Throws std::domain_error when the
/// logs contain no reads.
double action_to_read_ratio(std::span<const SessionLog> logs);

// JSONL record: session_id, fault_id, steps, resolved, operator, seed.
nlohmann::json to_json(const SessionLog& log);
SessionLog session_log_from_json(const nlohmann::json& j);

std::string to_jsonl_line(const SessionLog& log);
void write_jsonl(const std::string& path, std::span<const SessionLog> logs);
void append_jsonl(const std::string& path, const SessionLog& log);
std::vector<SessionLog> read_jsonl(const std::string& path);

}  // namespace toc
