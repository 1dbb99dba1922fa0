#include "toc/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "toc/fingerprint.hpp"
#include "toc/seeding.hpp"

namespace toc {

namespace {

constexpr std::size_t kRandomPolicyBudget = 64;

nlohmann::json steps_json(const std::vector<Step>& steps) {
  SessionLog tmp;
  tmp.steps = steps;
  return to_json(tmp).at("steps");
}

}  // namespace

bool prediction_correct(int predicted_token, const EncodedSequence& test_sequence,
                        const Vocabulary& vocab, std::size_t from) {
  if (predicted_token < 0 || static_cast<std::size_t>(predicted_token) >= vocab.size()) {
    return false;
  }
  if (!vocab.token(predicted_token).is_step()) return false;
  for (std::size_t i = from; i < test_sequence.steps.size(); ++i) {
    if (test_sequence.steps[i].token_id == predicted_token) return true;
  }
  return false;
}

bool sequence_correct(const RobotConfig& config, const SessionLog& log) {
  return replay_resolves(config, log);
}

std::optional<double> KStepCell::accuracy() const {
  if (eligible == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(eligible);
}

const KStepCell& KStepMatrix::at(std::size_t bucket_index, int horizon) const {
  if (bucket_index >= start_buckets.size() || horizon < 1 || horizon > horizons) {
    throw std::out_of_range("k-step cell out of range");
  }
  return cells[bucket_index * static_cast<std::size_t>(horizons) +
               static_cast<std::size_t>(horizon - 1)];
}

KStepMatrix kstep_experiment(const LstmParams& params, const SequenceCodec& codec,
                             std::span<const SessionLog> test_logs, const KStepOptions& options) {
  if (test_logs.empty()) throw std::invalid_argument("k-step experiment needs test sequences");
  if (options.horizons < 1) throw std::invalid_argument("horizons must be at least 1");

  KStepMatrix m;
  m.start_buckets = options.start_buckets;
  m.horizons = options.horizons;
  for (int s : options.start_buckets) {
    if (s < 0) throw std::invalid_argument("start lengths must be non-negative");
    for (int k = 1; k <= options.horizons; ++k) m.cells.push_back({s, k, 0, 0});
  }

  const RobotConfig& config = codec.config();
  const Vocabulary& vocab = codec.vocabulary();
  RolloutPolicy policy{StopCondition::until_stop, options.horizons};

  for (std::size_t li = 0; li < test_logs.size(); ++li) {
    const SessionLog& log = test_logs[li];
    const EncodedSequence full = codec.encode(log);
    for (std::size_t b = 0; b < options.start_buckets.size(); ++b) {
      const auto s = static_cast<std::size_t>(options.start_buckets[b]);
      if (log.steps.size() <= s) continue;

      // The live session has already seen the prefix's actions.
      Session session(config, log.fault_id, derive_seed(options.seed, li * 131 + b));
      for (std::size_t i = 0; i < s; ++i) {
        if (const auto* act = std::get_if<ActStep>(&log.steps[i])) {
          session.trigger_action(act->action_id);
        }
      }
      const RolloutResult r = rollout(params, codec, session, codec.prefix(log, s), policy);
      const std::size_t from = options.suffix_only ? codec.prompt_length() + s : 0;
      for (int k = 1; k <= options.horizons; ++k) {
        auto& cell = m.cells[b * static_cast<std::size_t>(options.horizons) +
                             static_cast<std::size_t>(k - 1)];
        ++cell.eligible;
        const auto idx = static_cast<std::size_t>(k - 1);
        if (idx < r.tokens.size() && prediction_correct(r.tokens[idx], full, vocab, from)) {
          ++cell.correct;
        }
      }
    }
  }
  return m;
}

std::size_t AutonomousResult::resolved_count() const {
  return static_cast<std::size_t>(
      std::ranges::count_if(per_fault, [](const auto& o) { return o.resolved; }));
}

AutonomousResult autonomous_experiment(const LstmParams& params, const SequenceCodec& codec,
                                       std::uint64_t seed, StopCondition stop) {
  const RobotConfig& config = codec.config();
  AutonomousResult result;
  RolloutPolicy policy{stop, 64};
  for (std::size_t f = 0; f < config.faults.size(); ++f) {
    const FaultSpec& fault = config.faults[f];
    Session session(config, fault.id, derive_seed(seed, f));
    const RolloutResult r = rollout(params, codec, session, codec.prompt(fault.id), policy);
    AutonomousOutcome out;
    out.fault_id = fault.id;
    out.resolved = r.resolved;
    out.steps_taken = r.steps_before_action;
    out.ideal_steps = fault.ideal_reads.size();
    out.outcome = r.outcome;
    out.steps = r.steps;
    result.per_fault.push_back(std::move(out));
  }
  if (!config.faults.empty()) {
    result.success_rate = static_cast<double>(result.resolved_count()) /
                          static_cast<double>(config.faults.size());
  }
  return result;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double analytic_random_baseline(const RobotConfig& config) {
  if (config.faults.empty() || config.actions.empty()) return 0.0;
  double total = 0.0;
  for (const auto& fault : config.faults) {
    if (fault.resolution.size() == 1) total += 1.0 / static_cast<double>(config.actions.size());
  }
  return total / static_cast<double>(config.faults.size());
}

SessionLog random_policy_log(const RobotConfig& config, const FaultSpec& fault, Rng& rng,
                             std::uint64_t session_seed) {
  Session session(config, fault.id, session_seed);
  const auto act_at =
      std::uniform_int_distribution<std::size_t>(0, kRandomPolicyBudget - 1)(rng);
  for (std::size_t i = 0; i < act_at && !config.sensors.empty(); ++i) {
    const auto s = std::uniform_int_distribution<std::size_t>(0, config.sensors.size() - 1)(rng);
    session.reveal_sensor(config.sensors[s].id);
  }
  if (!config.actions.empty()) {
    const auto a = std::uniform_int_distribution<std::size_t>(0, config.actions.size() - 1)(rng);
    session.trigger_action(config.actions[a].id);
  }
  return session.finalize(OperatorKind::synthetic);
}

BaselineEstimate random_baseline(const RobotConfig& config, std::size_t trials,
                                 std::uint64_t seed) {
  if (trials < 1000) throw std::invalid_argument("random baseline needs at least 1000 trials");
  BaselineEstimate est;
  est.trials = trials;
  est.analytic = analytic_random_baseline(config);
  if (config.faults.empty()) return est;

  // Reads cannot change whether a single action resolves a fault, so each
  // episode only draws its action step and its action here;
  // random_policy_log materializes the same policy in full.
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> step(0, kRandomPolicyBudget - 1);
  std::size_t successes = 0;
  std::size_t episodes = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (const auto& fault : config.faults) {
      ++episodes;
      (void)step(rng);
      if (config.actions.empty()) continue;
      const auto a = std::uniform_int_distribution<std::size_t>(0, config.actions.size() - 1)(rng);
      if (fault.resolution.size() == 1 && fault.resolution.front() == config.actions[a].id) {
        ++successes;
      }
    }
  }
  est.mean = static_cast<double>(successes) / static_cast<double>(episodes);
  est.ci95 = wilson_interval(successes, episodes);
  return est;
}

std::string dataset_fingerprint(std::span<const SessionLog> logs) {
  std::string bytes;
  for (const auto& log : logs) {
    bytes += to_jsonl_line(log);
    bytes += '\n';
  }
  return fingerprint(bytes);
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json kstep;
  kstep["start_buckets"] = report.kstep.start_buckets;
  kstep["horizons"] = report.kstep.horizons;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : report.kstep.cells) {
    nlohmann::ordered_json cell;
    cell["start_length"] = c.start_length;
    cell["horizon"] = c.horizon;
    cell["eligible"] = c.eligible;
    cell["correct"] = c.correct;
    if (auto acc = c.accuracy()) {
      cell["accuracy"] = *acc;
    } else {
      cell["accuracy"] = nullptr;
    }
    cells.push_back(cell);
  }
  kstep["cells"] = cells;
  j["kstep_accuracy"] = kstep;

  nlohmann::ordered_json autonomous = nlohmann::ordered_json::array();
  for (const auto& o : report.autonomous.per_fault) {
    nlohmann::ordered_json entry;
    entry["fault_id"] = o.fault_id;
    entry["resolved"] = o.resolved;
    entry["steps_taken"] = o.steps_taken;
    entry["ideal_steps"] = o.ideal_steps;
    entry["outcome"] = to_string(o.outcome);
    entry["steps"] = steps_json(o.steps);
    autonomous.push_back(entry);
  }
  j["autonomous"] = autonomous;
  j["success_rate"] = report.autonomous.success_rate;

  nlohmann::ordered_json baseline;
  baseline["mean"] = report.random_baseline.mean;
  baseline["ci95"] = {report.random_baseline.ci95.low, report.random_baseline.ci95.high};
  baseline["analytic"] = report.random_baseline.analytic;
  baseline["trials"] = report.random_baseline.trials;
  j["random_baseline"] = baseline;

  j["dataset_fingerprint"] = report.dataset_fingerprint;
  j["model_fingerprint"] = report.model_fingerprint;
  j["eval_seed"] = report.eval_seed;
  j["suffix_only"] = report.suffix_only;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  const auto& kstep = j.at("kstep_accuracy");
  r.kstep.start_buckets = kstep.at("start_buckets").get<std::vector<int>>();
  r.kstep.horizons = kstep.at("horizons").get<int>();
  for (const auto& c : kstep.at("cells")) {
    r.kstep.cells.push_back({c.at("start_length").get<int>(), c.at("horizon").get<int>(),
                             c.at("eligible").get<std::size_t>(),
                             c.at("correct").get<std::size_t>()});
  }
  for (const auto& e : j.at("autonomous")) {
    AutonomousOutcome o;
    o.fault_id = e.at("fault_id").get<std::string>();
    o.resolved = e.at("resolved").get<bool>();
    o.steps_taken = e.at("steps_taken").get<std::size_t>();
    o.ideal_steps = e.at("ideal_steps").get<std::size_t>();
    const auto outcome = e.at("outcome").get<std::string>();
    for (auto candidate : {RolloutOutcome::resolved, RolloutOutcome::action_taken,
                           RolloutOutcome::stopped, RolloutOutcome::invalid_token,
                           RolloutOutcome::budget_exhausted}) {
      if (to_string(candidate) == outcome) o.outcome = candidate;
    }
    SessionLog tmp = session_log_from_json({{"session_id", ""},
                                            {"fault_id", o.fault_id},
                                            {"steps", e.at("steps")},
                                            {"resolved", o.resolved},
                                            {"operator", "model"},
                                            {"seed", 0}});
    o.steps = std::move(tmp.steps);
    r.autonomous.per_fault.push_back(std::move(o));
  }
  r.autonomous.success_rate = j.at("success_rate").get<double>();
  const auto& b = j.at("random_baseline");
  r.random_baseline.mean = b.at("mean").get<double>();
  r.random_baseline.ci95 = {b.at("ci95").at(0).get<double>(), b.at("ci95").at(1).get<double>()};
  r.random_baseline.analytic = b.at("analytic").get<double>();
  r.random_baseline.trials = b.at("trials").get<std::size_t>();
  r.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  r.model_fingerprint = j.at("model_fingerprint").get<std::string>();
  r.eval_seed = j.at("eval_seed").get<std::uint64_t>();
  r.suffix_only = j.at("suffix_only").get<bool>();
  return r;
}

std::string kstep_csv(const KStepMatrix& matrix) {
  std::ostringstream out;
  out << "start_length,horizon,eligible,correct,accuracy\n";
  out << std::setprecision(17);
  for (const auto& c : matrix.cells) {
    out << c.start_length << ',' << c.horizon << ',' << c.eligible << ',' << c.correct << ',';
    if (auto acc = c.accuracy()) out << *acc;
    out << '\n';
  }
  return out.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  const auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
  };
  write(directory / "report.json", to_json(report).dump(2) + "\n");
  write(directory / "report.csv", kstep_csv(report.kstep));
}

EvalReport load_report(const std::filesystem::path& report_json) {
  std::ifstream in(report_json, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + report_json.string() + "'");
  return report_from_json(nlohmann::json::parse(in));
}

}  // namespace toc
