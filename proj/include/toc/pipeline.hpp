#pragma once

// End-to-end flows shared by the CLI and the acceptance harness:
// generate → filter → split, train a checkpoint, evaluate a checkpoint.

#include <optional>
#include <string>

#include "toc/checkpoint.hpp"
#include "toc/evaluation.hpp"

namespace toc {

struct GenerateSummary {
  std::size_t raw = 0;
  std::size_t removed_unresolved = 0;
  std::size_t removed_outliers = 0;
  Dataset dataset;
};

/// Generates, filters and splits. The split seed is derived from the
/// generation seed.
GenerateSummary generate_dataset(const RobotConfig& config, const GenerateOptions& options);

/// Writes the kept logs as JSONL and the split assignment as a JSON sidecar.
void write_dataset(const Dataset& dataset, const std::string& data_path,
                   const std::string& splits_path);

/// Reads logs and their split sidecar. With no splits path, looks for
/// splits.json next to the data file.
Dataset load_dataset(const std::string& data_path, const std::string& splits_path = {});

std::string default_splits_path(const std::string& data_path);

std::vector<EncodedSequence> encode_all(const SequenceCodec& codec,
                                        std::span<const SessionLog> logs);

struct TrainedModel {
  Checkpoint checkpoint;
  TrainResult result;
};

/// Initializes from config.seed and trains on the train split with
/// validation-loss early stopping.
TrainedModel train_model(const SequenceCodec& codec, const Dataset& dataset,
                         const TrainConfig& config);

struct EvalOptions {
  KStepOptions kstep;
  std::uint64_t seed = 11;
  std::size_t baseline_trials = 100000;
};

/// K-step matrix on the test split, first-action autonomous experiment and
/// random baseline, tagged with dataset and model fingerprints.
EvalReport evaluate_model(const Checkpoint& checkpoint, const SequenceCodec& codec,
                          const Dataset& dataset, const EvalOptions& options);

}  // namespace toc
