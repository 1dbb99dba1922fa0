#include "toc/robot_domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace toc {

namespace {

using nlohmann::json;

template <typename T>
const T* find_by_id(const std::vector<T>& items, std::string_view id) {
  auto it = std::ranges::find_if(items, [&](const T& item) { return item.id == id; });
  return it == items.end() ? nullptr : &*it;
}

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

// Reads a required field, reporting `where` on failure.
template <typename T>
T field(const json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) fail(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(where + ": field '" + key + "' has the wrong type");
  }
}

const json& array_field(const json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end() || !it->is_array()) {
    fail(std::string("top level: '") + key + "' must be an array");
  }
  return *it;
}

TaxonomyNode parse_node(const json& j, std::size_t index) {
  const std::string where = "taxonomy[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(where + ": expected an object");
  TaxonomyNode node;
  node.id = field<std::string>(j, "id", where);
  const std::string at = where + " ('" + node.id + "')";
  node.label = field<std::string>(j, "label", at);
  node.level = field<int>(j, "level", at);
  if (auto it = j.find("parent_id"); it != j.end() && !it->is_null()) {
    node.parent_id = field<std::string>(j, "parent_id", at);
  }
  try {
    node.kind = node_kind_from_string(field<std::string>(j, "kind", at));
  } catch (const ConfigError& e) {
    fail(at + ": " + e.what());
  }
  return node;
}

SensorSpec parse_sensor(const json& j, std::size_t index) {
  const std::string where = "sensors[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(where + ": expected an object");
  SensorSpec s;
  s.id = field<std::string>(j, "id", where);
  const std::string at = where + " ('" + s.id + "')";
  s.unit = field<std::string>(j, "unit", at);
  s.nominal_mean = field<double>(j, "nominal_mean", at);
  s.noise_std = field<double>(j, "noise_std", at);
  s.min_value = field<double>(j, "min_value", at);
  s.max_value = field<double>(j, "max_value", at);
  s.taxonomy_leaf = field<std::string>(j, "taxonomy_leaf", at);
  return s;
}

ActionSpec parse_action(const json& j, std::size_t index) {
  const std::string where = "actions[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(where + ": expected an object");
  ActionSpec a;
  a.id = field<std::string>(j, "id", where);
  const std::string at = where + " ('" + a.id + "')";
  a.label = field<std::string>(j, "label", at);
  a.taxonomy_leaf = field<std::string>(j, "taxonomy_leaf", at);
  return a;
}

FaultSpec parse_fault(const json& j, std::size_t index) {
  const std::string where = "faults[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(where + ": expected an object");
  FaultSpec f;
  f.id = field<std::string>(j, "id", where);
  const std::string at = where + " ('" + f.id + "')";
  f.symptom_message = field<std::string>(j, "symptom_message", at);
  const auto effects = field<json>(j, "sensor_effects", at);
  if (!effects.is_object()) fail(at + ": 'sensor_effects' must be an object");
  for (const auto& [sensor_id, effect] : effects.items()) {
    const std::string eat = at + ".sensor_effects['" + sensor_id + "']";
    f.sensor_effects[sensor_id] = SensorEffect{field<double>(effect, "shifted_mean", eat),
                                               field<double>(effect, "shifted_std", eat)};
  }
  f.resolution = field<std::vector<std::string>>(j, "resolution", at);
  f.ideal_reads = field<std::vector<std::string>>(j, "ideal_reads", at);
  if (j.contains("adjacent_sensors")) {
    f.adjacent_sensors = field<std::vector<std::string>>(j, "adjacent_sensors", at);
  }
  return f;
}

void validate_taxonomy(const RobotConfig& config) {
  if (config.taxonomy.empty()) fail("taxonomy must be non-empty");
  std::set<std::string_view> ids;
  int roots = 0;
  for (const auto& node : config.taxonomy) {
    if (!ids.insert(node.id).second) fail("taxonomy: duplicate node id '" + node.id + "'");
    if (node.level < kRootLevel || node.level > kLeafLevel) {
      fail("taxonomy node '" + node.id + "': level " + std::to_string(node.level) +
           " outside 0..3");
    }
    const bool leaf_kind = node.kind != NodeKind::category;
    if (leaf_kind != (node.level == kLeafLevel)) {
      fail("taxonomy node '" + node.id + "': kind " + std::string(to_string(node.kind)) +
           " does not match level " + std::to_string(node.level));
    }
    if (node.level == kRootLevel) {
      ++roots;
      if (node.parent_id) fail("taxonomy node '" + node.id + "': root must not have a parent");
    }
  }
  if (roots != 1) fail("taxonomy must have exactly one root, found " + std::to_string(roots));
  for (const auto& node : config.taxonomy) {
    if (node.level == kRootLevel) continue;
    if (!node.parent_id) fail("taxonomy node '" + node.id + "': missing parent_id");
    const TaxonomyNode* parent = config.find_node(*node.parent_id);
    if (parent == nullptr) {
      fail("taxonomy node '" + node.id + "': dangling parent_id '" + *node.parent_id + "'");
    }
    if (parent->level != node.level - 1) {
      fail("taxonomy node '" + node.id + "': parent '" + parent->id + "' has level " +
           std::to_string(parent->level) + ", expected " + std::to_string(node.level - 1));
    }
  }
}

void expect_leaf(const RobotConfig& config, const std::string& owner, const std::string& leaf,
                 NodeKind kind) {
  const TaxonomyNode* node = config.find_node(leaf);
  if (node == nullptr) fail(owner + ": dangling taxonomy_leaf '" + leaf + "'");
  if (node->kind != kind) {
    fail(owner + ": taxonomy_leaf '" + leaf + "' has kind " + std::string(to_string(node->kind)) +
         ", expected " + std::string(to_string(kind)));
  }
}

void validate_sensors(const RobotConfig& config) {
  std::set<std::string_view> ids;
  for (const auto& s : config.sensors) {
    const std::string owner = "sensor '" + s.id + "'";
    if (!ids.insert(s.id).second) fail("sensors: duplicate id '" + s.id + "'");
    if (!(s.min_value < s.max_value)) fail(owner + ": min_value must be below max_value");
    if (s.nominal_mean < s.min_value || s.nominal_mean > s.max_value) {
      fail(owner + ": nominal_mean outside [min_value, max_value]");
    }
    if (!(s.noise_std >= 0.0)) fail(owner + ": noise_std must be non-negative");
    expect_leaf(config, owner, s.taxonomy_leaf, NodeKind::sensor_leaf);
  }
}

void validate_actions(const RobotConfig& config) {
  std::set<std::string_view> ids;
  for (const auto& a : config.actions) {
    if (!ids.insert(a.id).second) fail("actions: duplicate id '" + a.id + "'");
    expect_leaf(config, "action '" + a.id + "'", a.taxonomy_leaf, NodeKind::actuator_leaf);
  }
}

void validate_faults(const RobotConfig& config) {
  if (config.faults.empty()) fail("faults must be non-empty");
  std::set<std::string_view> ids;
  for (const auto& f : config.faults) {
    const std::string owner = "fault '" + f.id + "'";
    if (!ids.insert(f.id).second) fail("faults: duplicate id '" + f.id + "'");
    if (f.sensor_effects.empty()) fail(owner + ": sensor_effects must be non-empty");
    for (const auto& [sensor_id, effect] : f.sensor_effects) {
      if (config.find_sensor(sensor_id) == nullptr) {
        fail(owner + ": sensor_effects references unknown sensor '" + sensor_id + "'");
      }
      if (!(effect.shifted_std >= 0.0)) {
        fail(owner + ": shifted_std of '" + sensor_id + "' must be non-negative");
      }
    }
    if (f.resolution.empty()) fail(owner + ": resolution must be non-empty");
    std::set<std::string_view> seen;
    for (const auto& action_id : f.resolution) {
      if (config.find_action(action_id) == nullptr) {
        fail(owner + ": resolution references unknown action '" + action_id + "'");
      }
      if (!seen.insert(action_id).second) {
        fail(owner + ": duplicate action '" + action_id + "' in resolution");
      }
    }
    for (const auto& sensor_id : f.adjacent_sensors) {
      if (config.find_sensor(sensor_id) == nullptr) {
        fail(owner + ": adjacent_sensors references unknown sensor '" + sensor_id + "'");
      }
    }
    for (const auto& sensor_id : f.ideal_reads) {
      if (config.find_sensor(sensor_id) == nullptr) {
        fail(owner + ": ideal_reads references unknown sensor '" + sensor_id + "'");
      }
      const bool adjacent = std::ranges::find(f.adjacent_sensors, sensor_id) !=
                            f.adjacent_sensors.end();
      if (!f.affects(sensor_id) && !adjacent) {
        fail(owner + ": ideal read '" + sensor_id +
             "' is neither affected by the fault nor declared adjacent");
      }
    }
  }
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::category:
      return "category";
    case NodeKind::sensor_leaf:
      return "sensor-leaf";
    case NodeKind::actuator_leaf:
      return "actuator-leaf";
  }
  return "category";
}

NodeKind node_kind_from_string(std::string_view text) {
  if (text == "category") return NodeKind::category;
  if (text == "sensor-leaf") return NodeKind::sensor_leaf;
  if (text == "actuator-leaf") return NodeKind::actuator_leaf;
  throw ConfigError("unknown node kind '" + std::string(text) + "'");
}

bool FaultSpec::affects(std::string_view sensor_id) const {
  return sensor_effects.find(std::string(sensor_id)) != sensor_effects.end();
}

const TaxonomyNode* RobotConfig::find_node(std::string_view id) const {
  return find_by_id(taxonomy, id);
}
const SensorSpec* RobotConfig::find_sensor(std::string_view id) const {
  return find_by_id(sensors, id);
}
const ActionSpec* RobotConfig::find_action(std::string_view id) const {
  return find_by_id(actions, id);
}
const FaultSpec* RobotConfig::find_fault(std::string_view id) const {
  return find_by_id(faults, id);
}

const TaxonomyNode& RobotConfig::node(std::string_view id) const {
  if (const auto* n = find_node(id)) return *n;
  fail("unknown taxonomy node '" + std::string(id) + "'");
}
const SensorSpec& RobotConfig::sensor(std::string_view id) const {
  if (const auto* s = find_sensor(id)) return *s;
  fail("unknown sensor '" + std::string(id) + "'");
}
const ActionSpec& RobotConfig::action(std::string_view id) const {
  if (const auto* a = find_action(id)) return *a;
  fail("unknown action '" + std::string(id) + "'");
}
const FaultSpec& RobotConfig::fault(std::string_view id) const {
  if (const auto* f = find_fault(id)) return *f;
  fail("unknown fault '" + std::string(id) + "'");
}

const std::string& RobotConfig::leaf_label(std::string_view leaf_id) const {
  return node(leaf_id).label;
}

void validate(const RobotConfig& config) {
  validate_taxonomy(config);
  validate_sensors(config);
  validate_actions(config);
  validate_faults(config);
}

RobotConfig load_robot_config(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(std::string("parse failure: ") + e.what());
  }
  if (!root.is_object()) fail("top level: expected an object");

  RobotConfig config;
  config.schema_version = field<std::string>(root, "schema_version", "top level");
  const auto& taxonomy = array_field(root, "taxonomy");
  for (std::size_t i = 0; i < taxonomy.size(); ++i) config.taxonomy.push_back(parse_node(taxonomy[i], i));
  const auto& sensors = array_field(root, "sensors");
  for (std::size_t i = 0; i < sensors.size(); ++i) config.sensors.push_back(parse_sensor(sensors[i], i));
  const auto& actions = array_field(root, "actions");
  for (std::size_t i = 0; i < actions.size(); ++i) config.actions.push_back(parse_action(actions[i], i));
  const auto& faults = array_field(root, "faults");
  for (std::size_t i = 0; i < faults.size(); ++i) config.faults.push_back(parse_fault(faults[i], i));

  validate(config);
  return config;
}

RobotConfig load_robot_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  // An unreadable file is an I/O failure, not a malformed config.
  if (!in) throw std::runtime_error("cannot open robot config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_robot_config(buffer.str());
}

const RobotConfig& default_robot_config() {
  static const RobotConfig config = load_robot_config(default_robot_config_text());
  return config;
}

nlohmann::json to_json(const RobotConfig& config) {
  json taxonomy = json::array();
  for (const auto& n : config.taxonomy) {
    taxonomy.push_back({{"id", n.id},
                        {"label", n.label},
                        {"level", n.level},
                        {"parent_id", n.parent_id ? json(*n.parent_id) : json(nullptr)},
                        {"kind", to_string(n.kind)}});
  }
  json sensors = json::array();
  for (const auto& s : config.sensors) {
    sensors.push_back({{"id", s.id},
                       {"unit", s.unit},
                       {"nominal_mean", s.nominal_mean},
                       {"noise_std", s.noise_std},
                       {"min_value", s.min_value},
                       {"max_value", s.max_value},
                       {"taxonomy_leaf", s.taxonomy_leaf}});
  }
  json actions = json::array();
  for (const auto& a : config.actions) {
    actions.push_back({{"id", a.id}, {"label", a.label}, {"taxonomy_leaf", a.taxonomy_leaf}});
  }
  json faults = json::array();
  for (const auto& f : config.faults) {
    json effects = json::object();
    for (const auto& [sensor_id, e] : f.sensor_effects) {
      effects[sensor_id] = {{"shifted_mean", e.shifted_mean}, {"shifted_std", e.shifted_std}};
    }
    json fault = {{"id", f.id},
                  {"symptom_message", f.symptom_message},
                  {"sensor_effects", effects},
                  {"resolution", f.resolution},
                  {"ideal_reads", f.ideal_reads}};
    if (!f.adjacent_sensors.empty()) fault["adjacent_sensors"] = f.adjacent_sensors;
    faults.push_back(std::move(fault));
  }
  return {{"schema_version", config.schema_version},
          {"taxonomy", taxonomy},
          {"sensors", sensors},
          {"actions", actions},
          {"faults", faults}};
}

std::string serialize_robot_config(const RobotConfig& config) {
  return to_json(config).dump(2);
}

TaxonomyPath taxonomy_path(const RobotConfig& config, std::string_view leaf_id) {
  const TaxonomyNode* node = config.find_node(leaf_id);
  if (node == nullptr) fail("unknown taxonomy node '" + std::string(leaf_id) + "'");
  if (node->level != kLeafLevel) fail("taxonomy node '" + node->id + "' is not a leaf");
  TaxonomyPath path;
  for (int level = kLeafLevel; level >= kRootLevel; --level) {
    path[static_cast<std::size_t>(level)] = node->id;
    if (level > kRootLevel) node = &config.node(*node->parent_id);
  }
  return path;
}

double sample_reading(const RobotConfig& config, const FaultSpec* fault,
                      std::string_view sensor_id, Rng& rng) {
  const SensorSpec& sensor = config.sensor(sensor_id);
  double mean = sensor.nominal_mean;
  double stddev = sensor.noise_std;
  if (fault != nullptr) {
    if (auto it = fault->sensor_effects.find(sensor.id); it != fault->sensor_effects.end()) {
      mean = it->second.shifted_mean;
      stddev = it->second.shifted_std;
    }
  }
  double value = mean;
  if (stddev > 0.0) value = std::normal_distribution<double>(mean, stddev)(rng);
  value = std::clamp(value, sensor.min_value, sensor.max_value);
  return std::round(value * 10.0) / 10.0;
}

}  // namespace toc
