#include "toc/pipeline.hpp"

#include <filesystem>

#include "toc/fingerprint.hpp"
#include "toc/seeding.hpp"

namespace toc {

namespace {
constexpr std::uint64_t kSplitStream = 0x5b11;
constexpr std::uint64_t kInitStream = 0x1417;
}  // namespace

GenerateSummary generate_dataset(const RobotConfig& config, const GenerateOptions& options) {
  auto logs = generate_sessions(config, options);
  GenerateSummary summary;
  summary.raw = logs.size();
  FilterResult filtered = filter_dataset(std::move(logs));
  summary.removed_unresolved = filtered.removed_unresolved;
  summary.removed_outliers = filtered.removed_outliers;
  summary.dataset = split_dataset(std::move(filtered.kept), derive_seed(options.seed, kSplitStream));
  return summary;
}

std::string default_splits_path(const std::string& data_path) {
  return (std::filesystem::path(data_path).parent_path() / "splits.json").string();
}

void write_dataset(const Dataset& dataset, const std::string& data_path,
                   const std::string& splits_path) {
  write_jsonl(data_path, dataset.logs);
  write_splits(splits_path.empty() ? default_splits_path(data_path) : splits_path,
               dataset.split_assignment);
}

Dataset load_dataset(const std::string& data_path, const std::string& splits_path) {
  auto logs = read_jsonl(data_path);
  auto assignment = read_splits(splits_path.empty() ? default_splits_path(data_path) : splits_path);
  return make_dataset(std::move(logs), std::move(assignment));
}

std::vector<EncodedSequence> encode_all(const SequenceCodec& codec,
                                        std::span<const SessionLog> logs) {
  std::vector<EncodedSequence> out;
  out.reserve(logs.size());
  for (const auto& log : logs) out.push_back(codec.encode(log));
  return out;
}

TrainedModel train_model(const SequenceCodec& codec, const Dataset& dataset,
                         const TrainConfig& config) {
  const auto train_seqs = encode_all(codec, dataset.logs_in(Split::train));
  const auto val_seqs = encode_all(codec, dataset.logs_in(Split::val));
  LstmParams init = LstmParams::initialized(dims_for(codec), derive_seed(config.seed, kInitStream));

  TrainedModel model;
  model.result = train(std::move(init), train_seqs, val_seqs, config);
  model.checkpoint.params = model.result.params;
  model.checkpoint.vocab_hash = codec.vocabulary().hash();
  model.checkpoint.symptom_token = codec.uses_symptom_token();
  model.checkpoint.train_config = config;
  return model;
}

EvalReport evaluate_model(const Checkpoint& checkpoint, const SequenceCodec& codec,
                          const Dataset& dataset, const EvalOptions& options) {
  const auto test_logs = dataset.logs_in(Split::test);
  KStepOptions kstep = options.kstep;
  kstep.seed = derive_seed(options.seed, 1);

  EvalReport report;
  report.kstep = kstep_experiment(checkpoint.params, codec, test_logs, kstep);
  report.autonomous = autonomous_experiment(checkpoint.params, codec, derive_seed(options.seed, 2));
  report.random_baseline =
      random_baseline(codec.config(), options.baseline_trials, derive_seed(options.seed, 3));
  report.dataset_fingerprint = dataset_fingerprint(dataset.logs);
  report.model_fingerprint = fingerprint(serialize_checkpoint(checkpoint));
  report.eval_seed = options.seed;
  report.suffix_only = kstep.suffix_only;
  return report;
}

}  // namespace toc
