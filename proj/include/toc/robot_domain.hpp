#pragma once

// Static description of the simulated vacuum robot: component taxonomy,
// sensors, actuators and the catalog of injectable faults.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace toc {

using Rng = std::mt19937_64;

/// Raised for malformed or inconsistent robot configurations. The message
/// always names the offending id and where it was found.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind { category, sensor_leaf, actuator_leaf };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view text);

inline constexpr int kRootLevel = 0;
inline constexpr int kLeafLevel = 3;

struct TaxonomyNode {
  std::string id;
  std::string label;
  int level = 0;
  std::optional<std::string> parent_id;
  NodeKind kind = NodeKind::category;

  bool operator==(const TaxonomyNode&) const = default;
};

struct SensorSpec {
  std::string id;
  std::string unit;
  double nominal_mean = 0.0;
  double noise_std = 0.0;
  double min_value = 0.0;
  double max_value = 1.0;
  std::string taxonomy_leaf;

  bool operator==(const SensorSpec&) const = default;
};

struct ActionSpec {
  std::string id;
  std::string label;
  std::string taxonomy_leaf;

  bool operator==(const ActionSpec&) const = default;
};

struct SensorEffect {
  double shifted_mean = 0.0;
  double shifted_std = 0.0;

  bool operator==(const SensorEffect&) const = default;
};

struct FaultSpec {
  std::string id;
  std::string symptom_message;
  std::map<std::string, SensorEffect> sensor_effects;
  std::vector<std::string> resolution;
  std::vector<std::string> ideal_reads;
  // Sensors that are not perturbed by the fault but belong to its
  // diagnostic neighbourhood. ideal_reads may draw from these.
  std::vector<std::string> adjacent_sensors;

  bool affects(std::string_view sensor_id) const;

  bool operator==(const FaultSpec&) const = default;
};

struct RobotConfig {
  std::string schema_version;
  std::vector<TaxonomyNode> taxonomy;
  std::vector<SensorSpec> sensors;
  std::vector<ActionSpec> actions;
  std::vector<FaultSpec> faults;

  const TaxonomyNode* find_node(std::string_view id) const;
  const SensorSpec* find_sensor(std::string_view id) const;
  const ActionSpec* find_action(std::string_view id) const;
  const FaultSpec* find_fault(std::string_view id) const;

  // Throwing variants; ConfigError names the missing id.
  const TaxonomyNode& node(std::string_view id) const;
  const SensorSpec& sensor(std::string_view id) const;
  const ActionSpec& action(std::string_view id) const;
  const FaultSpec& fault(std::string_view id) const;

  // Human-readable label of a sensor or action, taken from its taxonomy leaf.
  const std::string& leaf_label(std::string_view leaf_id) const;

  bool operator==(const RobotConfig&) const = default;
};

/// Checks every structural invariant and cross-reference. Throws ConfigError.
void validate(const RobotConfig& config);

/// Parses and validates a JSON configuration document.
RobotConfig load_robot_config(std::string_view document);
RobotConfig load_robot_config_file(const std::string& path);

/// The vacuum robot that ships with the workbench (20 sensors, 26 actions,
/// 20 faults).
const RobotConfig& default_robot_config();
std::string_view default_robot_config_text();

nlohmann::json to_json(const RobotConfig& config);
std::string serialize_robot_config(const RobotConfig& config);

using TaxonomyPath = std::array<std::string, 4>;

/// Root-to-leaf path of node ids. Throws ConfigError for unknown or
/// non-leaf ids.
TaxonomyPath taxonomy_path(const RobotConfig& config, std::string_view leaf_id);

/// One noisy reading of `sensor_id`, drawn from the fault's shifted
/// distribution when the fault affects the sensor and from the nominal one
/// otherwise. Clamped to the sensor range and quantized to 0.1.
double sample_reading(const RobotConfig& config, const FaultSpec* fault,
                      std::string_view sensor_id, Rng& rng);

}  // namespace toc
