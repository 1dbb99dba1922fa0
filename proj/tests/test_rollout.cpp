#include "doctest.h"
#include "support.hpp"
#include "toc/rollout.hpp"

using namespace toc;

namespace {

// A model whose prediction ignores its input: all weights zero, so the
// logits are the output bias.
LstmParams constant_model(const SequenceCodec& codec, int favored, double margin = 5.0) {
  LstmParams p = LstmParams::zeros(dims_for(codec));
  p.output_bias(favored) = margin;
  return p;
}

}  // namespace

TEST_CASE("first-action rollout resolves with the right action") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto p = constant_model(codec, codec.vocabulary().act_id("empty_dust_bin"));
  Session s(c, "bin_full", 1);
  const RolloutResult r = rollout(p, codec, s, codec.prompt("bin_full"), {});
  CHECK(r.resolved);
  CHECK(r.outcome == RolloutOutcome::resolved);
  CHECK(r.steps.size() == 1);
  CHECK(r.steps_before_action == 0);

  Session other(c, "veers_left", 1);
  const RolloutResult miss = rollout(p, codec, other, codec.prompt("veers_left"), {});
  CHECK_FALSE(miss.resolved);
  CHECK(miss.outcome == RolloutOutcome::action_taken);
  CHECK(other.applied_actions().size() == 1);
}

TEST_CASE("reads are answered by the session until the budget runs out") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto p = constant_model(codec, codec.vocabulary().read_id("battery_voltage"));
  Session s(c, "battery_drain", 4);
  const RolloutResult r = rollout(p, codec, s, codec.prompt("battery_drain"), {StopCondition::first_action, 7});
  CHECK(r.outcome == RolloutOutcome::budget_exhausted);
  CHECK(r.tokens.size() == 7);
  CHECK(r.steps_before_action == 7);
  CHECK(s.steps().size() == 7);
  CHECK(std::get<ReadStep>(r.steps[3]).value == std::get<ReadStep>(s.steps()[3]).value);
  CHECK(to_string(r.outcome) == "unresolved, budget exhausted");
}

TEST_CASE("non-step tokens end the rollout without touching the session") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  Session s(c, "bin_full", 1);

  const RolloutResult stop = rollout(constant_model(codec, codec.vocabulary().stop_id()), codec, s,
                                     codec.prompt("bin_full"), {});
  CHECK(stop.outcome == RolloutOutcome::stopped);
  CHECK(stop.tokens == std::vector<int>{codec.vocabulary().stop_id()});

  const RolloutResult bad = rollout(constant_model(codec, codec.vocabulary().symptom_id("bin_full")),
                                    codec, s, codec.prompt("bin_full"), {});
  CHECK(bad.outcome == RolloutOutcome::invalid_token);
  CHECK(s.steps().empty());
}

TEST_CASE("until-stop rollout keeps going past wrong actions") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto p = constant_model(codec, codec.vocabulary().act_id("clean_filter"));
  Session s(c, "bin_full", 1);
  const RolloutResult r = rollout(p, codec, s, codec.prompt("bin_full"), {StopCondition::until_stop, 4});
  CHECK(r.outcome == RolloutOutcome::budget_exhausted);
  CHECK(s.applied_actions().size() == 4);
}

TEST_CASE("rollout argument checks") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto p = constant_model(codec, 0);
  Session s(c, "bin_full", 1);
  CHECK_THROWS_AS(rollout(p, codec, s, codec.prompt("bin_full"), {StopCondition::first_action, 0}),
                  std::invalid_argument);
  EncodedSequence empty;
  CHECK_THROWS_AS(rollout(p, codec, s, empty, {}), ModelError);
}

TEST_CASE("suggestions are the top READ/ACT tokens by probability") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const Vocabulary& v = codec.vocabulary();
  LstmParams p = LstmParams::zeros(dims_for(codec));
  p.output_bias(v.stop_id()) = 9.0;  // not a step: never suggested
  p.output_bias(v.act_id("swap_battery")) = 3.0;
  p.output_bias(v.read_id("charge_level")) = 2.0;
  p.output_bias(v.read_id("battery_voltage")) = 1.0;
  p.output_bias(v.read_id("airflow_rate")) = 1.0;

  const auto s = suggest_next(p, codec, codec.prompt("battery_drain"), 5);
  REQUIRE(s.size() == 5);
  CHECK(s[0].token_id == v.act_id("swap_battery"));
  CHECK(s[1].token_id == v.read_id("charge_level"));
  // Equal probabilities: lower id first.
  CHECK(s[2].token_id == std::min(v.read_id("battery_voltage"), v.read_id("airflow_rate")));
  CHECK(s[3].token_id == std::max(v.read_id("battery_voltage"), v.read_id("airflow_rate")));
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1].probability >= s[i].probability);
}
