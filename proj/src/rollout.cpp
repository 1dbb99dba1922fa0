#include "toc/rollout.hpp"

#include <algorithm>
#include <numeric>

namespace toc {

std::string_view to_string(StopCondition stop) {
  return stop == StopCondition::first_action ? "first-action" : "until-stop";
}

std::string_view to_string(RolloutOutcome outcome) {
  switch (outcome) {
    case RolloutOutcome::resolved:
      return "resolved";
    case RolloutOutcome::action_taken:
      return "action-taken";
    case RolloutOutcome::stopped:
      return "stopped";
    case RolloutOutcome::invalid_token:
      return "invalid-token";
    case RolloutOutcome::budget_exhausted:
      return "unresolved, budget exhausted";
  }
  return "unresolved, budget exhausted";
}

RolloutResult rollout(const LstmParams& params, const SequenceCodec& codec, Session& session,
                      const EncodedSequence& prefix, const RolloutPolicy& policy) {
  if (policy.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  if (prefix.steps.size() < codec.prompt_length()) {
    throw ModelError("rollout prefix must start with the prompt tokens");
  }
  const Vocabulary& vocab = codec.vocabulary();
  SequenceRunner runner(params);
  runner.feed(prefix);

  RolloutResult result;
  bool acted = false;
  for (int n = 0; n < policy.max_steps; ++n) {
    const int token_id = argmax(runner.logits());
    result.tokens.push_back(token_id);
    const Token& token = vocab.token(token_id);

    if (token.kind == TokenKind::stop) {
      result.outcome = RolloutOutcome::stopped;
      return result;
    }
    if (!token.is_step()) {
      result.outcome = RolloutOutcome::invalid_token;
      return result;
    }
    if (token.kind == TokenKind::read) {
      const double value = session.reveal_sensor(token.entity);
      result.steps.emplace_back(ReadStep{token.entity, value});
      if (!acted) ++result.steps_before_action;
      runner.feed(codec.read(token.entity, value));
      continue;
    }

    acted = true;
    result.steps.emplace_back(ActStep{token.entity});
    result.resolved = session.trigger_action(token.entity);
    if (result.resolved) {
      result.outcome = RolloutOutcome::resolved;
      return result;
    }
    if (policy.stop == StopCondition::first_action) {
      result.outcome = RolloutOutcome::action_taken;
      return result;
    }
    runner.feed(codec.act(token.entity));
  }
  result.outcome = RolloutOutcome::budget_exhausted;
  return result;
}

std::vector<Suggestion> suggest_next(const LstmParams& params, const SequenceCodec& codec,
                                     const EncodedSequence& prefix, std::size_t k) {
  SequenceRunner runner(params);
  runner.feed(prefix);
  const Eigen::VectorXd probs = softmax(runner.logits());
  const Vocabulary& vocab = codec.vocabulary();

  std::vector<int> ids;
  for (int id = 0; id < static_cast<int>(vocab.size()); ++id) {
    if (vocab.token(id).is_step()) ids.push_back(id);
  }
  std::ranges::stable_sort(ids, [&](int a, int b) { return probs(a) > probs(b); });
  ids.resize(std::min(k, ids.size()));

  std::vector<Suggestion> out;
  for (int id : ids) out.push_back({id, probs(id)});
  return out;
}

}  // namespace toc
