#include "doctest.h"
#include "support.hpp"
#include "toc/diagnosis_sim.hpp"

using namespace toc;

TEST_CASE("session resolves on a single correct action") {
  const RobotConfig& c = default_robot_config();
  Session s(c, "bin_full", 3, "t1");
  CHECK(s.symptom_message() == c.fault("bin_full").symptom_message);
  s.reveal_sensor("suction_pressure");
  CHECK_FALSE(s.trigger_action("clean_filter"));
  CHECK(s.trigger_action("empty_dust_bin"));
  CHECK(s.resolved());
  CHECK_THROWS_AS(s.reveal_sensor("suction_pressure"), AlreadyResolvedError);
  CHECK_THROWS_AS(s.trigger_action("empty_dust_bin"), AlreadyResolvedError);

  const SessionLog log = s.finalize();
  CHECK(log.steps.size() == 3);
  CHECK(log.read_count() == 1);
  CHECK(log.act_count() == 2);
  CHECK(log.resolved);
}

TEST_CASE("multi-action faults resolve on set completion, order-free") {
  const RobotConfig& c = default_robot_config();
  const auto& fix = c.fault("charging_fails").resolution;
  REQUIRE(fix.size() == 3);
  Session s(c, "charging_fails", 1);
  CHECK_FALSE(s.trigger_action(fix[2]));
  CHECK_FALSE(s.trigger_action("empty_dust_bin"));  // wrong actions are harmless
  CHECK_FALSE(s.trigger_action(fix[0]));
  CHECK_FALSE(s.trigger_action(fix[0]));
  CHECK(s.trigger_action(fix[1]));
}

TEST_CASE("unknown ids are rejected without touching the log") {
  const RobotConfig& c = default_robot_config();
  CHECK_THROWS_AS(Session(c, "no_fault", 1), UnknownIdError);
  Session s(c, "bin_full", 1);
  CHECK_THROWS_AS(s.reveal_sensor("nope"), UnknownIdError);
  CHECK_THROWS_AS(s.trigger_action("nope"), UnknownIdError);
  CHECK(s.steps().empty());
}

TEST_CASE("readings are deterministic per seed and fresh per reveal") {
  const RobotConfig& c = default_robot_config();
  Session a(c, "weak_suction", 42);
  Session b(c, "weak_suction", 42);
  for (int i = 0; i < 5; ++i) CHECK(a.reveal_sensor("suction_pressure") == b.reveal_sensor("suction_pressure"));
  CHECK(a.steps().size() == 5);
  CHECK(a.revealed().at("suction_pressure") == b.revealed().at("suction_pressure"));
}

TEST_CASE("replay reproduces resolution") {
  const RobotConfig& c = default_robot_config();
  Session s(c, "dust_cloud", 8, "r");
  s.reveal_sensor("airflow_rate");
  for (const auto& a : c.fault("dust_cloud").resolution) s.trigger_action(a);
  const SessionLog log = s.finalize();
  CHECK(replay_resolves(c, log));

  SessionLog partial = log;
  partial.steps.pop_back();
  CHECK_FALSE(replay_resolves(c, partial));
}

TEST_CASE("action-to-read ratio") {
  const RobotConfig& c = default_robot_config();
  Session s(c, "bin_full", 1);
  s.reveal_sensor("suction_pressure");
  s.reveal_sensor("airflow_rate");
  s.reveal_sensor("airflow_rate");
  s.reveal_sensor("bin_fill_level");
  s.trigger_action("empty_dust_bin");
  const std::vector<SessionLog> logs{s.finalize()};
  CHECK(action_to_read_ratio(logs) == doctest::Approx(0.25));

  Session only_act(c, "bin_full", 1);
  only_act.trigger_action("empty_dust_bin");
  const std::vector<SessionLog> no_reads{only_act.finalize()};
  CHECK_THROWS_AS(action_to_read_ratio(no_reads), std::domain_error);
}

TEST_CASE("JSONL round trip keeps every field") {
  const RobotConfig& c = default_robot_config();
  Session s(c, "veers_left", 77, "rt-1");
  s.reveal_sensor("left_wheel_speed");
  s.trigger_action("replace_drive_wheel");
  SessionLog log = s.finalize(OperatorKind::human);

  const std::string line = to_jsonl_line(log);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind(R"({"session_id":"rt-1","fault_id":"veers_left","steps":)", 0) == 0);
  CHECK(session_log_from_json(nlohmann::json::parse(line)) == log);

  testing::TempDir dir("jsonl");
  const std::string path = dir.file("logs.jsonl");
  write_jsonl(path, std::vector<SessionLog>{log});
  append_jsonl(path, log);
  const auto back = read_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1] == log);
}

TEST_CASE("malformed JSONL reports the line") {
  testing::TempDir dir("badjsonl");
  const std::string path = dir.file("bad.jsonl");
  {
    std::ofstream out(path);
    out << "{\"session_id\":\"x\"}\n";
  }
  CHECK_THROWS_WITH(read_jsonl(path), doctest::Contains(":1:"));
}
