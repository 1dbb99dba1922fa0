// toc: command-line front end for dataset generation, training, evaluation
// and the interactive session backend.
//
// Exit codes: 0 success, 1 usage/validation error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "toc/fingerprint.hpp"
#include "toc/pipeline.hpp"
#include "toc/service.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with it.
#include "CLI11.hpp"
#include "httplib.h"

namespace {

using namespace toc;

// Raised for bad user input discovered after argument parsing.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : std::move(fallback);
}

RobotConfig load_config(const std::string& path) {
  return path.empty() ? default_robot_config() : load_robot_config_file(path);
}

std::vector<WeightedProfile> load_profiles_or_default(const std::string& path) {
  return path.empty() ? default_profiles() : load_profiles(path);
}

struct Options {
  std::string config_path;

  // generate
  std::uint64_t gen_seed = 7;
  int sessions_per_fault = 30;
  std::string profiles_path;
  std::string gen_out = "data.jsonl";
  std::string gen_splits;

  // train
  std::uint64_t train_seed = 1;
  std::string data_path;
  std::string splits_path;
  std::string model_out = "model.ckpt";
  TrainConfig train;
  bool no_symptom_token = false;
  std::string curve_out;

  // eval
  std::uint64_t eval_seed = 11;
  std::string model_path;
  std::string report_dir = ".";
  int horizons = 5;
  std::vector<int> start_buckets = {2, 4, 6, 8};
  std::size_t trials = 100000;
  bool suffix_only = false;

  // baseline
  std::uint64_t baseline_seed = 3;

  // simulate
  std::uint64_t sim_seed = 0;
  std::string fault_id;
  std::string replay_path;

  // serve
  std::uint64_t serve_seed = 0;
  int port = 8080;
  std::string data_out;
};

int run_generate(const Options& o) {
  const RobotConfig config = load_config(o.config_path);
  GenerateOptions gen;
  gen.profiles = load_profiles_or_default(o.profiles_path);
  gen.sessions_per_fault = o.sessions_per_fault;
  gen.seed = o.gen_seed;
  const GenerateSummary summary = generate_dataset(config, gen);
  const std::string splits = o.gen_splits.empty() ? default_splits_path(o.gen_out) : o.gen_splits;
  write_dataset(summary.dataset, o.gen_out, splits);

  const auto& d = summary.dataset;
  std::cout << "raw sessions:        " << summary.raw << "\n"
            << "removed unresolved:  " << summary.removed_unresolved << "\n"
            << "removed outliers:    " << summary.removed_outliers << "\n"
            << "kept sequences:      " << d.stats.count << "\n"
            << "mean length:         " << d.stats.mean_length << "\n"
            << "action/read ratio:   " << d.stats.action_to_read_ratio << "\n"
            << "split train/val/test " << d.count(Split::train) << "/" << d.count(Split::val)
            << "/" << d.count(Split::test) << "\n"
            << "wrote " << o.gen_out << " and " << splits << "\n";
  return 0;
}

int run_train(const Options& o) {
  if (o.data_path.empty()) throw ValidationError("train needs --data");
  const RobotConfig config = load_config(o.config_path);
  const SequenceCodec codec(config, !o.no_symptom_token);
  const Dataset dataset = load_dataset(o.data_path, o.splits_path);

  TrainConfig tc = o.train;
  tc.seed = o.train_seed;
  validate(tc);
  const TrainedModel model = train_model(codec, dataset, tc);
  for (const auto& e : model.result.curve) {
    std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << "\n";
  }
  save_checkpoint(o.model_out, model.checkpoint);
  if (!o.curve_out.empty()) {
    std::ofstream curve(o.curve_out);
    if (!curve) throw std::runtime_error("cannot write '" + o.curve_out + "'");
    curve << "epoch,train_loss,val_loss\n";
    for (const auto& e : model.result.curve) {
      curve << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
    }
  }
  std::cout << "best epoch " << model.result.best_epoch << " of " << model.result.curve.size()
            << (model.result.early_stopped ? " (early stop)" : "") << "\n"
            << "wrote " << o.model_out << " (" << fingerprint_file(o.model_out) << ")\n";
  return 0;
}

int run_eval(const Options& o) {
  if (o.model_path.empty() || o.data_path.empty()) throw ValidationError("eval needs --model and --data");
  const RobotConfig config = load_config(o.config_path);
  // The checkpoint records whether it was trained with the symptom token.
  std::ifstream in(o.model_path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + o.model_path + "'");
  std::stringstream text;
  text << in.rdbuf();
  const bool symptom = parse_checkpoint(text.str()).symptom_token;
  const SequenceCodec codec(config, symptom);
  const Checkpoint checkpoint = load_checkpoint(o.model_path, codec);
  const Dataset dataset = load_dataset(o.data_path, o.splits_path);

  EvalOptions eo;
  eo.seed = o.eval_seed;
  eo.baseline_trials = o.trials;
  eo.kstep.horizons = o.horizons;
  eo.kstep.start_buckets = o.start_buckets;
  eo.kstep.suffix_only = o.suffix_only;
  if (o.trials < 1000) throw ValidationError("--trials must be at least 1000");
  const EvalReport report = evaluate_model(checkpoint, codec, dataset, eo);
  std::filesystem::create_directories(o.report_dir);
  emit_report(report, o.report_dir);

  std::cout << "autonomous: " << report.autonomous.resolved_count() << "/"
            << report.autonomous.per_fault.size() << " faults (success_rate "
            << report.success_rate() << ")\n"
            << "random baseline: " << report.random_baseline.mean << " [" << report.random_baseline.ci95.low
            << ", " << report.random_baseline.ci95.high << "]\n";
  std::cout << kstep_csv(report.kstep);
  std::cout << "wrote " << (std::filesystem::path(o.report_dir) / "report.json").string() << "\n";
  return 0;
}

int run_baseline(const Options& o) {
  if (o.trials < 1000) throw ValidationError("--trials must be at least 1000");
  const RobotConfig config = load_config(o.config_path);
  const BaselineEstimate b = random_baseline(config, o.trials, o.baseline_seed);
  nlohmann::ordered_json j;
  j["trials"] = b.trials;
  j["mean"] = b.mean;
  j["ci95"] = {b.ci95.low, b.ci95.high};
  j["analytic"] = b.analytic;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_simulate(const Options& o) {
  const RobotConfig config = load_config(o.config_path);
  if (!o.replay_path.empty()) {
    std::size_t resolved = 0;
    const auto logs = read_jsonl(o.replay_path);
    for (const auto& log : logs) {
      const bool ok = replay_resolves(config, log);
      resolved += ok ? 1 : 0;
      std::cout << log.session_id << ' ' << (ok ? "resolved" : "unresolved") << "\n";
    }
    std::cout << resolved << "/" << logs.size() << " logs replay to resolved\n";
    return 0;
  }
  if (o.fault_id.empty()) throw ValidationError("simulate needs --fault or --data");
  if (config.find_fault(o.fault_id) == nullptr) {
    throw ValidationError("unknown fault '" + o.fault_id + "'");
  }
  const auto profiles = load_profiles_or_default(o.profiles_path);
  OperatorProfile profile = profiles.front().profile;
  profile.seed = o.sim_seed;
  SessionLog log = simulate_operator(config, o.fault_id, profile);
  log.session_id = "sim-" + o.fault_id;
  std::cout << to_jsonl_line(log) << "\n";
  return 0;
}

int run_serve(const Options& o) {
  const RobotConfig config = load_config(o.config_path);
  ServiceOptions so;
  so.data_out = o.data_out;
  so.master_seed = o.serve_seed;
  DiagnosisService service(config, so);
  if (!o.model_path.empty()) {
    std::ifstream in(o.model_path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + o.model_path + "'");
    std::stringstream text;
    text << in.rdbuf();
    service.load_model(parse_checkpoint(text.str()));
  }
  httplib::Server server;
  mount_routes(server, service);
  std::cerr << "listening on 0.0.0.0:" << o.port << (service.model_loaded() ? " (model loaded)" : "")
            << "\n";
  if (!server.listen("0.0.0.0", o.port)) throw std::runtime_error("cannot bind port " + std::to_string(o.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Fault-diagnosis workbench: synthetic data, sequence model, evaluation, service"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "Robot config JSON (default: built-in vacuum robot)")
      ->envname("TOC_CONFIG");

  auto* gen = app.add_subcommand("generate", "Generate, filter and split a synthetic dataset");
  gen->add_option("--seed", o.gen_seed, "Master generation seed")->capture_default_str();
  gen->add_option("--sessions-per-fault", o.sessions_per_fault)->capture_default_str();
  gen->add_option("--profiles", o.profiles_path, "Operator profile mixture JSON");
  gen->add_option("--out", o.gen_out, "Output JSONL")->capture_default_str();
  gen->add_option("--splits", o.gen_splits, "Split sidecar (default: splits.json beside --out)");

  auto* tr = app.add_subcommand("train", "Train the sequence model");
  tr->add_option("--seed", o.train_seed, "Initialization and shuffle seed")->capture_default_str();
  tr->add_option("--data", o.data_path, "Dataset JSONL")->required();
  tr->add_option("--splits", o.splits_path, "Split sidecar");
  tr->add_option("--out", o.model_out, "Checkpoint path")->capture_default_str();
  tr->add_option("--epochs", o.train.epochs)->capture_default_str();
  tr->add_option("--lr", o.train.learning_rate)->capture_default_str();
  tr->add_option("--batch-size", o.train.batch_size)->capture_default_str();
  tr->add_option("--patience", o.train.early_stop_patience)->capture_default_str();
  tr->add_option("--clip", o.train.grad_clip_norm)->capture_default_str();
  tr->add_flag("--no-symptom-token", o.no_symptom_token, "Drop the SYMPTOM token from sequences");
  tr->add_option("--curve", o.curve_out, "Write the loss curve as CSV");

  auto* ev = app.add_subcommand("eval", "Run the k-step and autonomous experiments");
  ev->add_option("--seed", o.eval_seed, "Evaluation seed")->capture_default_str();
  ev->add_option("--model", o.model_path, "Checkpoint")->required();
  ev->add_option("--data", o.data_path, "Dataset JSONL")->required();
  ev->add_option("--splits", o.splits_path, "Split sidecar");
  ev->add_option("--out", o.report_dir, "Report directory")->capture_default_str();
  ev->add_option("--horizons", o.horizons)->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--start-buckets", o.start_buckets)->delimiter(',')->capture_default_str();
  ev->add_option("--trials", o.trials, "Random-baseline trials")->capture_default_str();
  ev->add_flag("--suffix-only", o.suffix_only, "Score only against the unseen suffix");

  auto* bl = app.add_subcommand("baseline", "Monte Carlo random-policy baseline");
  bl->add_option("--seed", o.baseline_seed)->capture_default_str();
  bl->add_option("--trials", o.trials)->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Run one scripted operator, or replay logs");
  sim->add_option("--seed", o.sim_seed)->capture_default_str();
  sim->add_option("--fault", o.fault_id, "Fault to inject");
  sim->add_option("--profiles", o.profiles_path, "Operator profile JSON (first entry is used)");
  sim->add_option("--data", o.replay_path, "Replay every log in this JSONL");

  auto* sv = app.add_subcommand("serve", "HTTP backend for the interactive tool");
  o.port = std::stoi(env_or("TOC_PORT", "8080"));
  o.model_path = env_or("TOC_MODEL", "");
  o.data_out = env_or("TOC_DATA_OUT", "");
  sv->add_option("--seed", o.serve_seed, "Master seed for sessions without an explicit seed")
      ->capture_default_str();
  sv->add_option("--port", o.port)->capture_default_str();
  sv->add_option("--model", o.model_path, "Checkpoint for suggestions");
  sv->add_option("--data-out", o.data_out, "JSONL that finished sessions are appended to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_generate(o);
    if (tr->parsed()) return run_train(o);
    if (ev->parsed()) return run_eval(o);
    if (bl->parsed()) return run_baseline(o);
    if (sim->parsed()) return run_simulate(o);
    if (sv->parsed()) return run_serve(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
