#include "toc/synthetic_operator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "toc/seeding.hpp"

namespace toc {

namespace {

// Stream ids for seeds derived from a session seed.
constexpr std::uint64_t kPolicyStream = 0x0b5e;
constexpr std::uint64_t kProfileStream = 0x9f0f;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// A wrong action near the first fix: same level-2 category, else same
// level-1 category, else anything that is not part of the resolution.
std::string pick_misfire(const RobotConfig& config, const FaultSpec& fault, Rng& rng) {
  const auto target = taxonomy_path(config, config.action(fault.resolution.front()).taxonomy_leaf);
  const auto is_fix = [&](const std::string& id) {
    return std::ranges::find(fault.resolution, id) != fault.resolution.end();
  };
  for (std::size_t depth : {std::size_t{2}, std::size_t{1}, std::size_t{0}}) {
    std::vector<std::string> candidates;
    for (const auto& action : config.actions) {
      if (is_fix(action.id)) continue;
      if (taxonomy_path(config, action.taxonomy_leaf)[depth] == target[depth]) {
        candidates.push_back(action.id);
      }
    }
    if (!candidates.empty()) return candidates[uniform_index(rng, candidates.size())];
  }
  return {};
}

}  // namespace

void validate(const OperatorProfile& profile) {
  if (!(profile.detour_rate >= 0.0 && profile.detour_rate <= 1.0)) {
    throw std::invalid_argument("detour_rate must be in [0, 1]");
  }
  if (!(profile.misfire_rate >= 0.0 && profile.misfire_rate <= 1.0)) {
    throw std::invalid_argument("misfire_rate must be in [0, 1]");
  }
  if (profile.confidence_threshold < 1) {
    throw std::invalid_argument("confidence_threshold must be at least 1");
  }
}

std::vector<WeightedProfile> default_profiles() {
  // Four operators that differ in how much evidence they gather, plus a
  // small share who get lost and produce the long tail.
  return {
      {{0.15, 6, 0.3, 0}, 0.24},
      {{0.15, 8, 0.3, 0}, 0.24},
      {{0.15, 10, 0.3, 0}, 0.24},
      {{0.15, 12, 0.3, 0}, 0.24},
      {{0.80, 10, 0.3, 0}, 0.04},
  };
}

std::vector<WeightedProfile> load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open profiles '" + path + "'");
  const auto j = nlohmann::json::parse(in);
  if (!j.is_array() || j.empty()) throw std::invalid_argument("profiles must be a non-empty array");
  std::vector<WeightedProfile> profiles;
  for (const auto& item : j) {
    WeightedProfile p;
    p.profile.detour_rate = item.at("detour_rate").get<double>();
    p.profile.confidence_threshold = item.at("confidence_threshold").get<int>();
    p.profile.misfire_rate = item.at("misfire_rate").get<double>();
    p.weight = item.value("weight", 1.0);
    validate(p.profile);
    if (!(p.weight > 0.0)) throw std::invalid_argument("profile weight must be positive");
    profiles.push_back(p);
  }
  return profiles;
}

nlohmann::json to_json(std::span<const WeightedProfile> profiles) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) {
    out.push_back({{"detour_rate", p.profile.detour_rate},
                   {"confidence_threshold", p.profile.confidence_threshold},
                   {"misfire_rate", p.profile.misfire_rate},
                   {"weight", p.weight}});
  }
  return out;
}

namespace {

// Sorts sensor ids by (panel distance from `anchor`'s panel, display
// order). Panels are level-1 categories in the order the dashboard lists
// their first sensor; the scan wraps around past the last panel.
void scan_panels(const RobotConfig& config, const std::string& anchor,
                 std::vector<std::string>& sensors) {
  std::vector<std::string> panels;
  std::map<std::string, std::pair<std::size_t, std::size_t>> position;  // id -> (panel, index)
  for (std::size_t i = 0; i < config.sensors.size(); ++i) {
    const std::string panel = taxonomy_path(config, config.sensors[i].taxonomy_leaf)[1];
    auto it = std::ranges::find(panels, panel);
    if (it == panels.end()) it = panels.insert(panels.end(), panel);
    position[config.sensors[i].id] = {static_cast<std::size_t>(it - panels.begin()), i};
  }
  const std::size_t start = anchor.empty() ? 0 : position.at(anchor).first;
  const auto key = [&](const std::string& id) {
    const auto [panel, index] = position.at(id);
    return std::pair((panel + panels.size() - start) % panels.size(), index);
  };
  std::ranges::sort(sensors, [&](const auto& a, const auto& b) { return key(a) < key(b); });
}

}  // namespace

SessionLog simulate_operator(const RobotConfig& config, std::string_view fault_id,
                             const OperatorProfile& profile) {
  validate(profile);
  Session session(config, fault_id, profile.seed);
  const FaultSpec& fault = session.fault();
  Rng rng(derive_seed(profile.seed, kPolicyStream));

  // Informative reads: the affected sensors first, in random order, then
  // the rest of the fault's reference checklist scanned in dashboard order,
  // starting at the panel that holds the first affected sensor.
  std::vector<std::string> affected;
  std::vector<std::string> adjacent;
  for (const auto& id : fault.ideal_reads) (fault.affects(id) ? affected : adjacent).push_back(id);
  for (const auto& [id, effect] : fault.sensor_effects) {
    if (std::ranges::find(affected, id) == affected.end()) affected.push_back(id);
  }
  std::ranges::shuffle(affected, rng);
  scan_panels(config, affected.empty() ? std::string() : affected.front(), adjacent);
  std::vector<std::string> informative = affected;
  informative.insert(informative.end(), adjacent.begin(), adjacent.end());

  std::vector<std::string> detours;
  for (const auto& sensor : config.sensors) {
    if (std::ranges::find(informative, sensor.id) == informative.end()) {
      detours.push_back(sensor.id);
    }
  }
  if (detours.empty()) {
    for (const auto& sensor : config.sensors) detours.push_back(sensor.id);
  }

  const auto at_cap = [&] { return session.steps().size() >= kMaxSessionSteps; };
  std::bernoulli_distribution detour(profile.detour_rate);
  int informative_reads = 0;
  while (informative_reads < profile.confidence_threshold) {
    if (at_cap()) return session.finalize();
    if (detour(rng)) {
      session.reveal_sensor(detours[uniform_index(rng, detours.size())]);
    } else {
      const auto slot = static_cast<std::size_t>(informative_reads) % informative.size();
      session.reveal_sensor(informative[slot]);
      ++informative_reads;
    }
  }

  if (std::bernoulli_distribution(profile.misfire_rate)(rng)) {
    const std::string wrong = pick_misfire(config, fault, rng);
    if (!wrong.empty()) {
      if (at_cap()) return session.finalize();
      session.trigger_action(wrong);
    }
  }
  for (const auto& action_id : fault.resolution) {
    if (at_cap() || session.resolved()) break;
    session.trigger_action(action_id);
  }
  return session.finalize();
}

std::vector<SessionLog> generate_sessions(const RobotConfig& config,
                                          const GenerateOptions& options) {
  if (options.profiles.empty()) throw std::invalid_argument("at least one profile is required");
  if (options.sessions_per_fault < 1) throw std::invalid_argument("sessions_per_fault must be >= 1");
  std::vector<double> weights;
  for (const auto& p : options.profiles) weights.push_back(p.weight);

  std::vector<SessionLog> logs;
  const auto per_fault = static_cast<std::size_t>(options.sessions_per_fault);
  logs.reserve(config.faults.size() * per_fault);
  for (std::size_t f = 0; f < config.faults.size(); ++f) {
    const auto& fault = config.faults[f];
    for (std::size_t s = 0; s < per_fault; ++s) {
      const std::uint64_t session_seed = derive_seed(options.seed, f * per_fault + s);
      Rng chooser(derive_seed(session_seed, kProfileStream));
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      OperatorProfile profile = options.profiles[pick(chooser)].profile;
      profile.seed = session_seed;
      SessionLog log = simulate_operator(config, fault.id, profile);
      std::ostringstream id;
      id << "syn-" << fault.id << '-' << s;
      log.session_id = id.str();
      logs.push_back(std::move(log));
    }
  }
  return logs;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::ranges::sort(values);
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

FilterResult filter_dataset(std::vector<SessionLog> logs) {
  FilterResult result;
  std::vector<SessionLog> resolved;
  for (auto& log : logs) {
    if (log.resolved) {
      resolved.push_back(std::move(log));
    } else {
      ++result.removed_unresolved;
    }
  }
  if (resolved.empty()) return result;

  std::vector<double> lengths;
  for (const auto& log : resolved) lengths.push_back(static_cast<double>(log.steps.size()));
  const double q1 = quantile(lengths, 0.25);
  const double q3 = quantile(lengths, 0.75);
  const double limit = q3 + 1.5 * (q3 - q1);
  for (auto& log : resolved) {
    if (static_cast<double>(log.steps.size()) > limit) {
      ++result.removed_outliers;
    } else {
      result.kept.push_back(std::move(log));
    }
  }
  return result;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(text) + "'");
}

DatasetStats compute_stats(std::span<const SessionLog> logs) {
  DatasetStats stats;
  stats.count = logs.size();
  if (logs.empty()) return stats;
  std::size_t steps = 0;
  for (const auto& log : logs) steps += log.steps.size();
  stats.mean_length = static_cast<double>(steps) / static_cast<double>(logs.size());
  stats.action_to_read_ratio = action_to_read_ratio(logs);
  return stats;
}

std::vector<SessionLog> Dataset::logs_in(Split split) const {
  std::vector<SessionLog> out;
  for (const auto& log : logs) {
    auto it = split_assignment.find(log.session_id);
    if (it != split_assignment.end() && it->second == split) out.push_back(log);
  }
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(std::ranges::count_if(
      split_assignment, [&](const auto& entry) { return entry.second == split; }));
}

namespace {

// Largest-remainder apportionment of `total` slots across groups in
// proportion to `quotas`, never exceeding `capacity`.
std::vector<std::size_t> apportion(const std::vector<double>& quotas,
                                   const std::vector<std::size_t>& capacity, std::size_t total) {
  std::vector<std::size_t> out(quotas.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < quotas.size(); ++i) {
    out[i] = std::min(static_cast<std::size_t>(std::floor(quotas[i])), capacity[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return quotas[a] - std::floor(quotas[a]) > quotas[b] - std::floor(quotas[b]);
  });
  while (assigned < total) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (assigned == total) break;
      if (out[i] < capacity[i]) {
        ++out[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return out;
}

}  // namespace

Dataset split_dataset(std::vector<SessionLog> logs, std::uint64_t seed) {
  if (logs.size() < 10) {
    throw std::invalid_argument("split needs at least 10 logs, got " + std::to_string(logs.size()));
  }
  std::map<std::string, std::vector<std::size_t>> by_fault;
  for (std::size_t i = 0; i < logs.size(); ++i) by_fault[logs[i].fault_id].push_back(i);

  std::vector<std::vector<std::size_t>> groups;
  std::vector<double> quotas;
  std::vector<std::size_t> sizes;
  std::size_t g = 0;
  for (auto& [fault_id, members] : by_fault) {
    Rng rng(derive_seed(seed, g++));
    std::ranges::shuffle(members, rng);
    quotas.push_back(0.1 * static_cast<double>(members.size()));
    sizes.push_back(members.size());
    groups.push_back(members);
  }

  const auto n = static_cast<double>(logs.size());
  const auto n_test = static_cast<std::size_t>(std::llround(0.1 * n));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * n));
  const auto test_counts = apportion(quotas, sizes, n_test);
  std::vector<std::size_t> remaining(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) remaining[i] = sizes[i] - test_counts[i];
  // Faults that already rounded up for test go last when rounding up for
  // validation.
  std::vector<double> val_quotas = quotas;
  for (std::size_t i = 0; i < val_quotas.size(); ++i) {
    if (test_counts[i] > static_cast<std::size_t>(std::floor(quotas[i]))) {
      val_quotas[i] = std::floor(quotas[i]);
    }
  }
  const auto val_counts = apportion(val_quotas, remaining, n_val);

  std::map<std::string, Split> assignment;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t k = 0; k < groups[i].size(); ++k) {
      Split split = Split::train;
      if (k < test_counts[i]) {
        split = Split::test;
      } else if (k < test_counts[i] + val_counts[i]) {
        split = Split::val;
      }
      assignment[logs[groups[i][k]].session_id] = split;
    }
  }
  return make_dataset(std::move(logs), std::move(assignment));
}

Dataset make_dataset(std::vector<SessionLog> logs, std::map<std::string, Split> assignment) {
  Dataset dataset;
  std::set<std::string> ids;
  for (const auto& log : logs) {
    if (!ids.insert(log.session_id).second) {
      throw std::invalid_argument("duplicate session id '" + log.session_id + "'");
    }
    if (!assignment.contains(log.session_id)) {
      throw std::invalid_argument("session '" + log.session_id + "' has no split");
    }
  }
  dataset.stats = compute_stats(logs);
  dataset.logs = std::move(logs);
  dataset.split_assignment = std::move(assignment);
  return dataset;
}

nlohmann::json splits_to_json(const std::map<std::string, Split>& assignment) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [id, split] : assignment) out[id] = to_string(split);
  return out;
}

std::map<std::string, Split> splits_from_json(const nlohmann::json& j) {
  std::map<std::string, Split> out;
  for (const auto& [id, split] : j.items()) out[id] = split_from_string(split.get<std::string>());
  return out;
}

void write_splits(const std::string& path, const std::map<std::string, Split>& assignment) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << splits_to_json(assignment).dump(1) << '\n';
}

std::map<std::string, Split> read_splits(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return splits_from_json(nlohmann::json::parse(in));
}

}  // namespace toc
