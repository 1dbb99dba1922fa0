#pragma once

// Scripted non-expert operators and the dataset pipeline built from them:
// generation, outlier/unresolved filtering and stratified splitting.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "toc/diagnosis_sim.hpp"

namespace toc {

inline constexpr std::size_t kMaxSessionSteps = 64;

struct OperatorProfile {
  // Probability that any given read is a detour to an unrelated sensor.
  double detour_rate = 0.15;
  // Informative reads taken before acting.
  int confidence_threshold = 8;
  // Probability of trying one wrong, related action before the fix.
  double misfire_rate = 0.3;
  std::uint64_t seed = 0;
};

void validate(const OperatorProfile& profile);

struct WeightedProfile {
  OperatorProfile profile;
  double weight = 1.0;
};

/// Operator population calibrated against the reference dataset statistics.
std::vector<WeightedProfile> default_profiles();
std::vector<WeightedProfile> load_profiles(const std::string& path);
nlohmann::json to_json(std::span<const WeightedProfile> profiles);

/// Runs the scripted policy for one session. Sessions that hit
/// kMaxSessionSteps come back unresolved.
SessionLog simulate_operator(const RobotConfig& config, std::string_view fault_id,
                             const OperatorProfile& profile);

struct GenerateOptions {
  std::vector<WeightedProfile> profiles = default_profiles();
  int sessions_per_fault = 30;
  std::uint64_t seed = 7;
};

/// sessions_per_fault sessions for every fault, in catalog order. Each
/// session's seed is derived from the master seed and its index.
std::vector<SessionLog> generate_sessions(const RobotConfig& config,
                                          const GenerateOptions& options);

struct FilterResult {
  std::vector<SessionLog> kept;
  std::size_t removed_outliers = 0;
  std::size_t removed_unresolved = 0;
};

/// Drops unresolved logs, then logs longer than Q3 + 1.5 IQR of the
/// remaining lengths.
FilterResult filter_dataset(std::vector<SessionLog> logs);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

struct DatasetStats {
  std::size_t count = 0;
  double mean_length = 0.0;
  double action_to_read_ratio = 0.0;

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats compute_stats(std::span<const SessionLog> logs);

struct Dataset {
  std::vector<SessionLog> logs;
  std::map<std::string, Split> split_assignment;
  DatasetStats stats;

  std::vector<SessionLog> logs_in(Split split) const;
  std::size_t count(Split split) const;
};

/// 80/10/10 split stratified by fault; deterministic under `seed`.
/// Throws std::invalid_argument for fewer than 10 logs.
Dataset split_dataset(std::vector<SessionLog> logs, std::uint64_t seed);

/// Rebuilds a dataset from logs plus a stored split mapping.
Dataset make_dataset(std::vector<SessionLog> logs, std::map<std::string, Split> assignment);

nlohmann::json splits_to_json(const std::map<std::string, Split>& assignment);
std::map<std::string, Split> splits_from_json(const nlohmann::json& j);
void write_splits(const std::string& path, const std::map<std::string, Split>& assignment);
std::map<std::string, Split> read_splits(const std::string& path);

}  // namespace toc
