// Acceptance harness: one PASS/FAIL line per headline criterion, exit code
// 1 if any fails. Everything runs from the built-in config and seeds.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "toc/fingerprint.hpp"
#include "toc/pipeline.hpp"

using namespace toc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += o.pass ? 0 : 1;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome dataset_statistics() {
  const auto start = Clock::now();
  const GenerateSummary s = generate_dataset(default_robot_config(), GenerateOptions{});
  const double elapsed = seconds_since(start);
  const auto& st = s.dataset.stats;
  const bool pass = std::abs(static_cast<double>(st.count) - 570.0) <= 15.0 &&
                    std::abs(st.mean_length - 12.8) <= 2.0 &&
                    std::abs(st.action_to_read_ratio - 0.153) <= 0.03 && elapsed < 30.0;
  return {pass, "kept " + std::to_string(st.count) + " (target 570+-15), mean length " +
                    fmt(st.mean_length) + " (12.8+-2.0), action/read " +
                    fmt(st.action_to_read_ratio) + " (0.153+-0.03), " + fmt(elapsed, 2) + " s"};
}

Outcome reference_ratio() {
  std::size_t reads = 0;
  std::size_t acts = 0;
  for (const auto& f : default_robot_config().faults) {
    reads += f.ideal_reads.size();
    acts += f.resolution.size();
  }
  const double ratio = static_cast<double>(acts) / static_cast<double>(reads);
  return {ratio >= 0.06 && ratio <= 0.10, std::to_string(acts) + " actions / " +
                                              std::to_string(reads) + " reads = " + fmt(ratio) +
                                              " (window [0.06, 0.10])"};
}

Outcome gradient_check() {
  const auto start = Clock::now();
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  ModelDims d = dims_for(codec);
  d.token_dim = 3;
  d.value_dim = 2;
  d.taxonomy_dim = 2;
  d.hidden = 5;
  LstmParams p = LstmParams::initialized(d, 31);
  p.output_bias.setConstant(0.05);
  p.value_bias.setConstant(0.1);

  OperatorProfile profile;
  profile.seed = 77;
  const EncodedSequence seq = codec.encode(simulate_operator(c, "streaky_cleaning", profile));
  const Gradients g = backward(p, seq);

  std::vector<std::span<double>> values;
  std::vector<std::span<const double>> grads;
  p.for_each([&](std::string_view, std::span<double> v) { values.push_back(v); });
  g.grad.for_each([&](std::string_view, std::span<const double> v) { grads.push_back(v); });
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    for (std::size_t k = 0; k < grads[t].size(); ++k) {
      if (grads[t][k] != 0.0) coords.emplace_back(t, k);
    }
  }
  Rng rng(5);
  std::ranges::shuffle(coords, rng);
  coords.resize(std::min<std::size_t>(coords.size(), 800));

  const double eps = 1e-5;
  double worst = 0.0;
  for (const auto& [t, k] : coords) {
    double& w = values[t][k];
    const double saved = w;
    w = saved + eps;
    const double up = sequence_loss(p, seq);
    w = saved - eps;
    const double down = sequence_loss(p, seq);
    w = saved;
    const double numeric = (up - down) / (2 * eps);
    const double analytic = grads[t][k];
    worst = std::max(worst, std::abs(numeric - analytic) /
                                std::max(1e-6, std::abs(numeric) + std::abs(analytic)));
  }
  const double elapsed = seconds_since(start);
  return {coords.size() >= 500 && worst < 1e-4 && elapsed < 10.0,
          "max relative error " + fmt(worst, 3) + " over " + std::to_string(coords.size()) +
              " coordinates, " + fmt(elapsed, 2) + " s"};
}

Outcome capacity() {
  const auto start = Clock::now();
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  GenerateOptions o;
  o.sessions_per_fault = 3;
  std::vector<EncodedSequence> seqs;
  std::set<std::string> seen;
  for (const auto& log : filter_dataset(generate_sessions(c, o)).kept) {
    if (seqs.size() < 10 && seen.insert(log.fault_id).second) seqs.push_back(codec.encode(log));
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 1;
  cfg.epochs = 200;
  const TrainResult r = train(LstmParams::initialized(dims_for(codec), 1), seqs, {}, cfg);
  const AccuracyCount acc = next_token_accuracy(r.params, codec.vocabulary(), seqs);
  const double elapsed = seconds_since(start);
  return {acc.rate() > 0.99 && elapsed < 60.0,
          "next-token accuracy " + fmt(acc.rate()) + " on " + std::to_string(seqs.size()) +
              " sequences (" + std::to_string(acc.total) + " targets), " + fmt(elapsed, 2) + " s"};
}

struct TrainedRun {
  Dataset dataset;
  std::vector<EvalReport> reports;  // one per training seed
  double seconds = 0.0;
};

// Shared by the autonomous and horizon criteria.
const TrainedRun& trained_runs() {
  static const TrainedRun run = [] {
    const auto start = Clock::now();
    TrainedRun r;
    r.dataset = generate_dataset(default_robot_config(), GenerateOptions{}).dataset;
    const SequenceCodec codec(default_robot_config());
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      TrainConfig tc;
      tc.seed = seed;
      const TrainedModel m = train_model(codec, r.dataset, tc);
      r.reports.push_back(evaluate_model(m.checkpoint, codec, r.dataset, EvalOptions{}));
    }
    r.seconds = seconds_since(start);
    return r;
  }();
  return run;
}

Outcome autonomous_resolution() {
  const TrainedRun& run = trained_runs();
  const EvalReport& first = run.reports.front();
  double mean = 0.0;
  std::string per_seed;
  for (const auto& r : run.reports) {
    mean += r.success_rate();
    per_seed += std::to_string(r.autonomous.resolved_count()) + " ";
  }
  mean /= static_cast<double>(run.reports.size());
  const double upper = first.random_baseline.ci95.high;
  const bool pass = first.autonomous.resolved_count() >= 5 && mean > upper && run.seconds < 600.0;
  return {pass, "seed 1 resolves " + std::to_string(first.autonomous.resolved_count()) +
                    "/20; resolved per seed [ " + per_seed + "]; mean success " + fmt(mean) +
                    " vs random baseline " + fmt(first.random_baseline.mean) + " (upper 95% " +
                    fmt(upper) + ", closed form " + fmt(first.random_baseline.analytic) + "); " +
                    "10x train+eval " + fmt(run.seconds, 3) + " s"};
}

Outcome horizon_degradation() {
  const KStepMatrix& m = trained_runs().reports.front().kstep;
  bool pass = true;
  std::string detail;
  for (std::size_t b = 0; b < m.start_buckets.size(); ++b) {
    const auto k1 = m.at(b, 1).accuracy();
    const auto k5 = m.at(b, m.horizons).accuracy();
    pass = pass && k1 && k5 && *k1 > *k5;
    detail += "s=" + std::to_string(m.start_buckets[b]) + ": k1 " + (k1 ? fmt(*k1, 3) : "n/a") +
              " > k" + std::to_string(m.horizons) + " " + (k5 ? fmt(*k5, 3) : "n/a") + "; ";
  }
  const auto shortest = m.at(0, 1).accuracy();
  const auto longest = m.at(m.start_buckets.size() - 1, 1).accuracy();
  pass = pass && shortest && longest && *shortest >= *longest;
  detail += "shortest-bucket k1 " + fmt(shortest.value_or(-1), 3) + " >= longest-bucket k1 " +
            fmt(longest.value_or(-1), 3);
  return {pass, detail};
}

Outcome metric_oracles() {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const Vocabulary& v = codec.vocabulary();
  Rng rng(4242);
  std::uniform_int_distribution<int> token(0, static_cast<int>(v.size()) - 1);
  std::uniform_int_distribution<int> length(0, 24);
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    EncodedSequence seq;
    const int n = length(rng);
    for (int i = 0; i < n; ++i) seq.steps.push_back({token(rng), 0.0, {}});
    const int predicted = token(rng);
    const Token want = v.token(predicted);
    bool expected = false;
    if (want.kind == TokenKind::read || want.kind == TokenKind::act) {
      for (const auto& s : seq.steps) {
        const Token& have = v.token(s.token_id);
        expected = expected || (have.kind == want.kind && have.entity == want.entity);
      }
    }
    agree += prediction_correct(predicted, seq, v) == expected ? 1 : 0;
  }

  // Raw generated logs, unresolved ones included.
  const auto logs = generate_sessions(c, GenerateOptions{});
  std::size_t replay_agree = 0;
  for (const auto& log : logs) replay_agree += sequence_correct(c, log) == replay_resolves(c, log) ? 1 : 0;
  return {agree == 1000 && replay_agree == logs.size(),
          "prediction_correct vs brute force " + std::to_string(agree) + "/1000; sequence_correct vs replay " +
              std::to_string(replay_agree) + "/" + std::to_string(logs.size())};
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() /
                    ("toc-acceptance-" + std::to_string(Clock::now().time_since_epoch().count()));
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  std::array<std::string, 2> data, splits, ckpt, rep;
  for (int run = 0; run < 2; ++run) {
    const auto dir = root / ("run" + std::to_string(run));
    std::filesystem::create_directories(dir);
    const Dataset d = generate_dataset(c, GenerateOptions{}).dataset;
    write_dataset(d, (dir / "data.jsonl").string(), (dir / "splits.json").string());
    const Dataset loaded = load_dataset((dir / "data.jsonl").string(), (dir / "splits.json").string());
    TrainConfig tc;
    tc.epochs = 3;
    const TrainedModel m = train_model(codec, loaded, tc);
    save_checkpoint((dir / "model.ckpt").string(), m.checkpoint);
    const Checkpoint cp = load_checkpoint((dir / "model.ckpt").string(), codec);
    emit_report(evaluate_model(cp, codec, loaded, EvalOptions{}), dir / "report");

    data[run] = read_file(dir / "data.jsonl");
    splits[run] = read_file(dir / "splits.json");
    ckpt[run] = read_file(dir / "model.ckpt");
    rep[run] = read_file(dir / "report" / "report.json") + read_file(dir / "report" / "report.csv");
  }
  std::filesystem::remove_all(root);
  const bool pass = !data[0].empty() && data[0] == data[1] && splits[0] == splits[1] &&
                    ckpt[0] == ckpt[1] && rep[0] == rep[1];
  return {pass, "dataset " + fingerprint(data[0]) + "/" + fingerprint(data[1]) + ", checkpoint " +
                    fingerprint(ckpt[0]) + "/" + fingerprint(ckpt[1]) + ", report " + fingerprint(rep[0]) +
                    "/" + fingerprint(rep[1])};
}

}  // namespace

int main() {
  report("dataset statistics", dataset_statistics);
  report("reference ratio", reference_ratio);
  report("gradient correctness", gradient_check);
  report("capacity sanity", capacity);
  report("autonomous resolution", autonomous_resolution);
  report("horizon degradation", horizon_degradation);
  report("metric oracles", metric_oracles);
  report("determinism", determinism);
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
