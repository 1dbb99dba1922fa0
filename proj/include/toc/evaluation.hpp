#pragma once

// Correctness metrics and the two model experiments: k-step prediction from
// partial test sequences, and autonomous resolution from an empty start.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toc/rollout.hpp"
#include "toc/synthetic_operator.hpp"

namespace toc {

/// True iff `predicted_token` is a READ or ACT token that occurs in
/// `test_sequence` at position `from` or later.
bool prediction_correct(int predicted_token, const EncodedSequence& test_sequence,
                        const Vocabulary& vocab, std::size_t from = 0);

/// True iff replaying the log against the simulator resolves its fault.
/// Throws UnknownIdError for an unknown fault.
bool sequence_correct(const RobotConfig& config, const SessionLog& log);

struct KStepOptions {
  int horizons = 5;
  std::vector<int> start_buckets = {2, 4, 6, 8};
  // Score against the part of the test sequence after the prefix only.
  bool suffix_only = false;
  std::uint64_t seed = 11;
};

struct KStepCell {
  int start_length = 0;
  int horizon = 0;
  std::size_t eligible = 0;
  std::size_t correct = 0;

  // Absent when no test sequence is long enough for the bucket.
  std::optional<double> accuracy() const;
  bool operator==(const KStepCell&) const = default;
};

struct KStepMatrix {
  std::vector<int> start_buckets;
  int horizons = 0;
  std::vector<KStepCell> cells;  // bucket-major

  const KStepCell& at(std::size_t bucket_index, int horizon) const;
  bool operator==(const KStepMatrix&) const = default;
};

/// For every test log and start bucket s (s diagnostic steps after the
/// prompt, eligible when the log has more than s steps), rolls the model out
/// closed-loop for `horizons` steps and scores the k-th generated step with
/// prediction_correct. A rollout that ends before step k scores as wrong.
KStepMatrix kstep_experiment(const LstmParams& params, const SequenceCodec& codec,
                             std::span<const SessionLog> test_logs, const KStepOptions& options);

struct AutonomousOutcome {
  std::string fault_id;
  bool resolved = false;
  std::size_t steps_taken = 0;
  std::size_t ideal_steps = 0;
  RolloutOutcome outcome = RolloutOutcome::budget_exhausted;
  std::vector<Step> steps;
  bool operator==(const AutonomousOutcome&) const = default;
};

struct AutonomousResult {
  std::vector<AutonomousOutcome> per_fault;
  double success_rate = 0.0;

  std::size_t resolved_count() const;
  bool operator==(const AutonomousResult&) const = default;
};

/// One fresh session per fault, rolled out from the bare prompt. With
/// first-action stopping a fault counts as solved only if that first action
/// completes its resolution.
AutonomousResult autonomous_experiment(const LstmParams& params, const SequenceCodec& codec,
                                       std::uint64_t seed,
                                       StopCondition stop = StopCondition::first_action);

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct BaselineEstimate {
  double mean = 0.0;
  Interval ci95;
  double analytic = 0.0;
  std::size_t trials = 0;
  bool operator==(const BaselineEstimate&) const = default;
};

/// Success probability of a uniformly random single action under
/// first-action stopping, averaged over the fault catalog.
double analytic_random_baseline(const RobotConfig& config);

/// Monte Carlo estimate of the random policy: random reads, then one random
/// action at a uniformly random step of the 64-step budget. Requires at
/// least 1000 trials.
BaselineEstimate random_baseline(const RobotConfig& config, std::size_t trials,
                                 std::uint64_t seed);

/// One random-policy episode as a loggable session.
SessionLog random_policy_log(const RobotConfig& config, const FaultSpec& fault, Rng& rng,
                             std::uint64_t session_seed);

struct EvalReport {
  KStepMatrix kstep;
  AutonomousResult autonomous;
  BaselineEstimate random_baseline;
  std::string dataset_fingerprint;
  std::string model_fingerprint;
  std::uint64_t eval_seed = 0;
  bool suffix_only = false;

  double success_rate() const { return autonomous.success_rate; }
  bool operator==(const EvalReport&) const = default;
};

std::string dataset_fingerprint(std::span<const SessionLog> logs);

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
std::string kstep_csv(const KStepMatrix& matrix);

/// Writes report.json and report.csv into `directory`.
void emit_report(const EvalReport& report, const std::filesystem::path& directory);
EvalReport load_report(const std::filesystem::path& report_json);

}  // namespace toc
