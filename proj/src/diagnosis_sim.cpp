#include "toc/diagnosis_sim.hpp"

#include <algorithm>
#include <fstream>

namespace toc {

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::synthetic:
      return "synthetic";
    case OperatorKind::human:
      return "human";
    case OperatorKind::model:
      return "model";
  }
  return "synthetic";
}

OperatorKind operator_kind_from_string(std::string_view text) {
  if (text == "synthetic") return OperatorKind::synthetic;
  if (text == "human") return OperatorKind::human;
  if (text == "model") return OperatorKind::model;
  throw std::invalid_argument("unknown operator kind '" + std::string(text) + "'");
}

std::size_t SessionLog::read_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(steps, is_read));
}

std::size_t SessionLog::act_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(steps, is_act));
}

Session::Session(const RobotConfig& config, std::string_view fault_id, std::uint64_t seed,
                 std::string session_id)
    : config_(&config),
      fault_(config.find_fault(fault_id)),
      session_id_(std::move(session_id)),
      seed_(seed),
      rng_(seed) {
  if (fault_ == nullptr) throw UnknownIdError("unknown fault '" + std::string(fault_id) + "'");
}

double Session::reveal_sensor(std::string_view sensor_id) {
  if (resolved_) throw AlreadyResolvedError();
  if (config_->find_sensor(sensor_id) == nullptr) {
    throw UnknownIdError("unknown sensor '" + std::string(sensor_id) + "'");
  }
  const double value = sample_reading(*config_, fault_, sensor_id, rng_);
  revealed_[std::string(sensor_id)] = value;
  steps_.emplace_back(ReadStep{std::string(sensor_id), value});
  return value;
}

bool Session::trigger_action(std::string_view action_id) {
  if (resolved_) throw AlreadyResolvedError();
  if (config_->find_action(action_id) == nullptr) {
    throw UnknownIdError("unknown action '" + std::string(action_id) + "'");
  }
  applied_actions_.emplace_back(action_id);
  steps_.emplace_back(ActStep{std::string(action_id)});
  resolved_ = std::ranges::all_of(fault_->resolution, [&](const std::string& needed) {
    return std::ranges::find(applied_actions_, needed) != applied_actions_.end();
  });
  return resolved_;
}

SessionLog Session::finalize(OperatorKind operator_kind) const {
  SessionLog log;
  log.session_id = session_id_;
  log.fault_id = fault_->id;
  log.steps = steps_;
  log.resolved = resolved_;
  log.operator_kind = operator_kind;
  log.seed = seed_;
  return log;
}

Session start_session(const RobotConfig& config, std::string_view fault_id, std::uint64_t seed) {
  return Session(config, fault_id, seed);
}

bool replay_resolves(const RobotConfig& config, const SessionLog& log) {
  Session session(config, log.fault_id, log.seed, log.session_id);
  for (const auto& step : log.steps) {
    if (session.resolved()) break;
    if (const auto* read = std::get_if<ReadStep>(&step)) {
      session.reveal_sensor(read->sensor_id);
    } else {
      session.trigger_action(std::get<ActStep>(step).action_id);
    }
  }
  return session.resolved();
}

double action_to_read_ratio(std::span<const SessionLog> logs) {
  std::size_t reads = 0;
  std::size_t acts = 0;
  for (const auto& log : logs) {
    reads += log.read_count();
    acts += log.act_count();
  }
  if (reads == 0) throw std::domain_error("action-to-read ratio undefined: no sensor reads");
  return static_cast<double>(acts) / static_cast<double>(reads);
}

nlohmann::json to_json(const SessionLog& log) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : log.steps) {
    if (const auto* read = std::get_if<ReadStep>(&step)) {
      steps.push_back({{"type", "read"}, {"sensor", read->sensor_id}, {"value", read->value}});
    } else {
      steps.push_back({{"type", "act"}, {"action", std::get<ActStep>(step).action_id}});
    }
  }
  return {{"session_id", log.session_id},
          {"fault_id", log.fault_id},
          {"steps", steps},
          {"resolved", log.resolved},
          {"operator", to_string(log.operator_kind)},
          {"seed", log.seed}};
}

SessionLog session_log_from_json(const nlohmann::json& j) {
  SessionLog log;
  log.session_id = j.at("session_id").get<std::string>();
  log.fault_id = j.at("fault_id").get<std::string>();
  for (const auto& step : j.at("steps")) {
    const auto type = step.at("type").get<std::string>();
    if (type == "read") {
      log.steps.emplace_back(
          ReadStep{step.at("sensor").get<std::string>(), step.at("value").get<double>()});
    } else if (type == "act") {
      log.steps.emplace_back(ActStep{step.at("action").get<std::string>()});
    } else {
      throw std::invalid_argument("unknown step type '" + type + "'");
    }
  }
  log.resolved = j.at("resolved").get<bool>();
  log.operator_kind = operator_kind_from_string(j.at("operator").get<std::string>());
  log.seed = j.at("seed").get<std::uint64_t>();
  return log;
}

std::string to_jsonl_line(const SessionLog& log) {
  nlohmann::ordered_json out;
  const auto j = to_json(log);
  for (const char* key : {"session_id", "fault_id", "steps", "resolved", "operator", "seed"}) {
    out[key] = j.at(key);
  }
  return out.dump();
}

void write_jsonl(const std::string& path, std::span<const SessionLog> logs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& log : logs) out << to_jsonl_line(log) << '\n';
}

void append_jsonl(const std::string& path, const SessionLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to '" + path + "'");
  out << to_jsonl_line(log) << '\n';
  out.flush();
}

std::vector<SessionLog> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<SessionLog> logs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      logs.push_back(session_log_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return logs;
}

}  // namespace toc
