#include "toc/service.hpp"

#include <chrono>
#include <cstdio>

#include "httplib.h"
#include "toc/rollout.hpp"
#include "toc/seeding.hpp"

namespace toc {

namespace {

constexpr std::size_t kSuggestions = 5;

ApiResponse error(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

std::optional<nlohmann::json> parse_body(const std::string& body) {
  if (body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) return std::nullopt;
    return j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::optional<std::string> string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::string session_name(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "session-%04llu", static_cast<unsigned long long>(n));
  return buf;
}

nlohmann::json taxonomy_subtree(const RobotConfig& config, const TaxonomyNode& node) {
  nlohmann::json j = {{"id", node.id},
                      {"label", node.label},
                      {"level", node.level},
                      {"kind", to_string(node.kind)}};
  if (node.kind == NodeKind::sensor_leaf) {
    for (const auto& s : config.sensors) {
      if (s.taxonomy_leaf == node.id) j["sensor_id"] = s.id, j["unit"] = s.unit;
    }
  } else if (node.kind == NodeKind::actuator_leaf) {
    for (const auto& a : config.actions) {
      if (a.taxonomy_leaf == node.id) j["action_id"] = a.id;
    }
  } else {
    nlohmann::json children = nlohmann::json::array();
    for (const auto& child : config.taxonomy) {
      if (child.parent_id && *child.parent_id == node.id) {
        children.push_back(taxonomy_subtree(config, child));
      }
    }
    j["children"] = children;
  }
  return j;
}

}  // namespace

DiagnosisService::DiagnosisService(RobotConfig config, ServiceOptions options)
    : config_(std::move(config)),
      options_(std::move(options)),
      codec_(std::make_unique<SequenceCodec>(config_)),
      fault_picker_(derive_seed(options_.master_seed, 0xfa17)) {
  validate(config_);
}

void DiagnosisService::load_model(Checkpoint checkpoint) {
  auto codec = std::make_unique<SequenceCodec>(config_, checkpoint.symptom_token);
  if (checkpoint.vocab_hash != codec->vocabulary().hash()) {
    throw ModelError("model vocabulary does not match the loaded robot config");
  }
  codec_ = std::move(codec);
  model_ = std::move(checkpoint);
}

std::shared_ptr<DiagnosisService::Entry> DiagnosisService::find(
    const std::string& session_id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t DiagnosisService::live_sessions() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

ApiResponse DiagnosisService::create_session(const std::string& body) {
  const auto request = parse_body(body);
  if (!request) return error(400, "malformed JSON body");
  std::optional<std::string> fault_id;
  if (request->contains("fault_id") && !(*request)["fault_id"].is_null()) {
    fault_id = string_field(*request, "fault_id");
    if (!fault_id) return error(400, "fault_id must be a string");
    if (config_.find_fault(*fault_id) == nullptr) return error(400, "unknown fault '" + *fault_id + "'");
  }
  std::optional<std::uint64_t> seed;
  if (auto it = request->find("seed"); it != request->end() && !it->is_null()) {
    if (!it->is_number_integer()) return error(400, "seed must be an integer");
    seed = it->get<std::uint64_t>();
  }

  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(sessions_mutex_);
    const std::uint64_t n = ++next_session_;
    if (!fault_id) {
      std::uniform_int_distribution<std::size_t> pick(0, config_.faults.size() - 1);
      fault_id = config_.faults[pick(fault_picker_)].id;
    }
    const std::string id = session_name(n);
    entry = std::make_shared<Entry>(config_, *fault_id,
                                    seed.value_or(derive_seed(options_.master_seed, n)), id);
    entry->created_at = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
    sessions_[id] = entry;
  }

  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& s : config_.sensors) {
    const auto path = taxonomy_path(config_, s.taxonomy_leaf);
    sensors.push_back({{"id", s.id},
                       {"label", config_.leaf_label(s.taxonomy_leaf)},
                       {"group", path[2]},
                       {"color_key", path[1]}});
  }
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : config_.actions) {
    const auto path = taxonomy_path(config_, a.taxonomy_leaf);
    actions.push_back({{"id", a.id}, {"label", a.label}, {"group", path[2]}});
  }
  return {200,
          {{"session_id", entry->session.session_id()},
           {"symptom_message", entry->session.symptom_message()},
           {"sensors", sensors},
           {"actions", actions}}};
}

ApiResponse DiagnosisService::reveal(const std::string& session_id, const std::string& body) {
  auto entry = find(session_id);
  if (!entry) return error(404, "unknown session '" + session_id + "'");
  const auto request = parse_body(body);
  if (!request) return error(400, "malformed JSON body");
  const auto sensor_id = string_field(*request, "sensor_id");
  if (!sensor_id) return error(400, "sensor_id is required");

  std::lock_guard lock(entry->mutex);
  try {
    const double value = entry->session.reveal_sensor(*sensor_id);
    return {200, {{"value", value}, {"unit", config_.sensor(*sensor_id).unit}}};
  } catch (const AlreadyResolvedError& e) {
    return error(409, e.what());
  } catch (const UnknownIdError& e) {
    return error(400, e.what());
  }
}

ApiResponse DiagnosisService::action(const std::string& session_id, const std::string& body) {
  auto entry = find(session_id);
  if (!entry) return error(404, "unknown session '" + session_id + "'");
  const auto request = parse_body(body);
  if (!request) return error(400, "malformed JSON body");
  const auto action_id = string_field(*request, "action_id");
  if (!action_id) return error(400, "action_id is required");

  std::lock_guard lock(entry->mutex);
  try {
    return {200, {{"resolved", entry->session.trigger_action(*action_id)}}};
  } catch (const AlreadyResolvedError& e) {
    return error(409, e.what());
  } catch (const UnknownIdError& e) {
    return error(400, e.what());
  }
}

ApiResponse DiagnosisService::suggest(const std::string& session_id) {
  auto entry = find(session_id);
  if (!entry) return error(404, "unknown session '" + session_id + "'");
  if (!model_) return {200, {{"suggestions", nlohmann::json::array()}, {"model_loaded", false}}};

  EncodedSequence prefix;
  {
    std::lock_guard lock(entry->mutex);
    prefix = codec_->prompt(entry->session.fault().id);
    for (const auto& step : entry->session.steps()) prefix.steps.push_back(codec_->step(step));
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : suggest_next(model_->params, *codec_, prefix, kSuggestions)) {
    const Token& t = codec_->vocabulary().token(s.token_id);
    out.push_back({{"kind", to_string(t.kind)}, {"entity_id", t.entity}, {"score", s.probability}});
  }
  return {200, {{"suggestions", out}, {"model_loaded", true}}};
}

ApiResponse DiagnosisService::finish(const std::string& session_id) {
  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return error(404, "unknown session '" + session_id + "'");
    entry = it->second;
    sessions_.erase(it);
  }
  SessionLog log;
  {
    std::lock_guard lock(entry->mutex);
    log = entry->session.finalize(OperatorKind::human);
    log.created_at = entry->created_at;
  }
  if (!options_.data_out.empty()) {
    std::lock_guard lock(persist_mutex_);
    try {
      append_jsonl(options_.data_out, log);
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }
  return {200, to_json(log)};
}

ApiResponse DiagnosisService::taxonomy() const {
  for (const auto& node : config_.taxonomy) {
    if (node.level == kRootLevel) return {200, taxonomy_subtree(config_, node)};
  }
  return error(500, "taxonomy has no root");
}

void mount_routes(httplib::Server& server, DiagnosisService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  const auto reply = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
  };

  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server.Post("/api/session", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.create_session(req.body));
  });
  server.Post(R"(/api/session/([^/]+)/reveal)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.reveal(req.matches[1], req.body));
              });
  server.Post(R"(/api/session/([^/]+)/action)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.action(req.matches[1], req.body));
              });
  server.Get(R"(/api/session/([^/]+)/suggest)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.suggest(req.matches[1]));
             });
  server.Post(R"(/api/session/([^/]+)/finish)",
              [&service, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, service.finish(req.matches[1]));
              });
  server.Get("/api/config/taxonomy", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.taxonomy());
  });
}

}  // namespace toc
