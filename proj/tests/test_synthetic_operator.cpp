#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "toc/pipeline.hpp"

using namespace toc;

namespace {

SessionLog log_of_length(const std::string& id, std::size_t reads, bool resolved = true) {
  SessionLog log;
  log.session_id = id;
  log.fault_id = "bin_full";
  for (std::size_t i = 0; i < reads; ++i) log.steps.push_back(ReadStep{"suction_pressure", 12.0});
  log.steps.push_back(ActStep{"empty_dust_bin"});
  log.resolved = resolved;
  return log;
}

}  // namespace

TEST_CASE("scripted operator is reproducible per seed") {
  const RobotConfig& c = default_robot_config();
  OperatorProfile p;
  p.seed = 1234;
  const SessionLog a = simulate_operator(c, "exhaust_hot", p);
  const SessionLog b = simulate_operator(c, "exhaust_hot", p);
  CHECK(a == b);
  CHECK(a.resolved);
  p.seed = 1235;
  CHECK_FALSE(simulate_operator(c, "exhaust_hot", p) == a);
}

TEST_CASE("scripted operator reads the affected sensors before acting") {
  const RobotConfig& c = default_robot_config();
  OperatorProfile p;
  p.detour_rate = 0.0;
  p.misfire_rate = 0.0;
  p.confidence_threshold = 6;
  p.seed = 3;
  const FaultSpec& f = c.fault("drive_slow");
  const SessionLog log = simulate_operator(c, f.id, p);
  REQUIRE(log.steps.size() == 7);
  for (std::size_t i = 0; i < f.sensor_effects.size(); ++i) {
    REQUIRE(is_read(log.steps[i]));
    CHECK(f.affects(std::get<ReadStep>(log.steps[i]).sensor_id));
  }
  CHECK(std::get<ActStep>(log.steps.back()).action_id == f.resolution.front());
}

TEST_CASE("operator hitting the step cap comes back unresolved") {
  const RobotConfig& c = default_robot_config();
  OperatorProfile p;
  p.detour_rate = 0.99;
  p.confidence_threshold = 40;
  p.seed = 9;
  const SessionLog log = simulate_operator(c, "charging_fails", p);
  CHECK(log.steps.size() == kMaxSessionSteps);
  CHECK_FALSE(log.resolved);
}

TEST_CASE("profile validation") {
  OperatorProfile p;
  p.detour_rate = 1.5;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.confidence_threshold = 0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("profiles load from JSON") {
  testing::TempDir dir("profiles");
  const std::string path = dir.file("p.json");
  {
    std::ofstream out(path);
    out << to_json(default_profiles()).dump();
  }
  const auto loaded = load_profiles(path);
  REQUIRE(loaded.size() == default_profiles().size());
  CHECK(loaded[4].profile.detour_rate == default_profiles()[4].profile.detour_rate);
  CHECK(loaded[4].weight == default_profiles()[4].weight);
}

TEST_CASE("quantile uses linear interpolation") {
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({4, 1, 3, 2}, 0.75) == doctest::Approx(3.25));
  CHECK(quantile({7}, 0.5) == 7);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("filter drops unresolved logs, then IQR length outliers") {
  // Lengths (steps) 5,6,7,8,9 and 30: Q1 = 6.25, Q3 = 8.75, limit 12.5.
  std::vector<SessionLog> logs;
  for (std::size_t r = 4; r <= 8; ++r) logs.push_back(log_of_length("ok" + std::to_string(r), r));
  logs.push_back(log_of_length("long", 29));
  logs.push_back(log_of_length("unresolved", 2, false));
  const FilterResult fr = filter_dataset(logs);
  CHECK(fr.removed_unresolved == 1);
  CHECK(fr.removed_outliers == 1);
  CHECK(fr.kept.size() == 5);
  CHECK(std::ranges::none_of(fr.kept, [](const auto& l) { return l.session_id == "long"; }));
}

TEST_CASE("generated dataset: kept logs replay, ids unique, order stable") {
  const RobotConfig& c = default_robot_config();
  GenerateOptions o;
  o.sessions_per_fault = 10;
  const auto logs = generate_sessions(c, o);
  CHECK(logs.size() == 200);
  CHECK(logs.front().session_id == "syn-" + c.faults.front().id + "-0");
  CHECK(logs == generate_sessions(c, o));
  for (const auto& log : filter_dataset(logs).kept) CHECK(replay_resolves(c, log));
}

TEST_CASE("split is 80/10/10, stratified and deterministic") {
  const RobotConfig& c = default_robot_config();
  GenerateOptions o;
  const GenerateSummary summary = generate_dataset(c, o);
  const Dataset& d = summary.dataset;
  const std::size_t n = d.logs.size();
  CHECK(d.count(Split::train) + d.count(Split::val) + d.count(Split::test) == n);
  CHECK(std::abs(static_cast<double>(d.count(Split::test)) - 0.1 * n) <= 1.0);
  CHECK(std::abs(static_cast<double>(d.count(Split::val)) - 0.1 * n) <= 1.0);

  std::map<std::string, std::pair<int, int>> per_fault;  // fault -> (test, total)
  for (const auto& log : d.logs) {
    auto& [test, total] = per_fault[log.fault_id];
    ++total;
    if (d.split_assignment.at(log.session_id) == Split::test) ++test;
  }
  for (const auto& [fault, counts] : per_fault) {
    CHECK_MESSAGE(std::abs(counts.first - 0.1 * counts.second) <= 1.0, fault);
  }

  const Dataset again = split_dataset(d.logs, 123);
  CHECK(split_dataset(d.logs, 123).split_assignment == again.split_assignment);
  CHECK_THROWS_AS(split_dataset(std::vector<SessionLog>(d.logs.begin(), d.logs.begin() + 9), 1),
                  std::invalid_argument);
}

TEST_CASE("split sidecar round-trips through disk") {
  const RobotConfig& c = default_robot_config();
  GenerateOptions o;
  o.sessions_per_fault = 5;
  const Dataset d = generate_dataset(c, o).dataset;
  testing::TempDir dir("splits");
  write_dataset(d, dir.file("data.jsonl"), "");
  const Dataset back = load_dataset(dir.file("data.jsonl"));
  CHECK(back.logs == d.logs);
  CHECK(back.split_assignment == d.split_assignment);
  CHECK(back.stats == d.stats);
}

TEST_CASE("default population reproduces the reference dataset statistics") {
  const GenerateSummary s = generate_dataset(default_robot_config(), GenerateOptions{});
  CHECK(s.raw == 600);
  CHECK(s.dataset.stats.count == doctest::Approx(570).epsilon(15.0 / 570));
  CHECK(s.dataset.stats.mean_length == doctest::Approx(12.8).epsilon(2.0 / 12.8));
  CHECK(s.dataset.stats.action_to_read_ratio == doctest::Approx(0.153).epsilon(0.03 / 0.153));
}
