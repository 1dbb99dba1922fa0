#pragma once

// Closed-loop greedy decoding against a live diagnosis session.

#include <vector>

#include "toc/lstm.hpp"

namespace toc {

enum class StopCondition { first_action, until_stop };

std::string_view to_string(StopCondition stop);

struct RolloutPolicy {
  StopCondition stop = StopCondition::first_action;
  int max_steps = 64;
};

enum class RolloutOutcome {
  resolved,          // the session reports the fault fixed
  action_taken,      // first-action stop on an action that did not fix it
  stopped,           // the model emitted STOP
  invalid_token,     // the model emitted START or a SYMPTOM token
  budget_exhausted,  // max_steps generated without another stop
};

std::string_view to_string(RolloutOutcome outcome);

struct RolloutResult {
  std::vector<int> tokens;  // every decoded token, including a final STOP
  std::vector<Step> steps;  // diagnostic steps executed on the session
  RolloutOutcome outcome = RolloutOutcome::budget_exhausted;
  bool resolved = false;
  // Steps generated before the first action (all steps if none).
  std::size_t steps_before_action = 0;
};

/// Greedy argmax decoding from `prefix`. READ tokens are answered by the
/// live session and their readings are fed back to the model; ACT tokens are
/// applied to the session. Decoding ends on the stop condition, when the
/// session resolves, or after max_steps tokens. Non-step tokens end the
/// rollout without touching the session.
RolloutResult rollout(const LstmParams& params, const SequenceCodec& codec, Session& session,
                      const EncodedSequence& prefix, const RolloutPolicy& policy);

/// Top-k next-token proposals restricted to READ/ACT tokens, by descending
/// probability with ties to the lower id.
struct Suggestion {
  int token_id = 0;
  double probability = 0.0;
};

std::vector<Suggestion> suggest_next(const LstmParams& params, const SequenceCodec& codec,
                                     const EncodedSequence& prefix, std::size_t k);

}  // namespace toc
