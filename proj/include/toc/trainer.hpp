#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "toc/lstm.hpp"

namespace toc {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 60;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  int early_stop_patience = 8;
  // Sequences per Adam update; the gradient is the batch mean.
  int batch_size = 8;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Adam with bias correction.
class Adam {
 public:
  Adam(const ModelDims& dims, const TrainConfig& config);

  void step(LstmParams& params, const LstmParams& grad);
  long steps_taken() const { return t_; }

 private:
  TrainConfig config_;
  LstmParams m_;
  LstmParams v_;
  long t_ = 0;
};

/// Rescales grad in place so its global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradient(LstmParams& grad, double max_norm);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  // NaN when there is no validation data.
  double val_loss = 0.0;
};

struct TrainResult {
  LstmParams params;
  std::vector<EpochStats> curve;
  int best_epoch = -1;
  bool early_stopped = false;
};

double mean_loss(const LstmParams& params, std::span<const EncodedSequence> seqs);

/// Mini-batch Adam over shuffled training sequences. The shuffle order of
/// each epoch is derived from config.seed, so runs are reproducible. When
/// validation data is given, training stops after `early_stop_patience`
/// epochs without improvement and the best parameters are returned.
TrainResult train(LstmParams params, std::span<const EncodedSequence> train_set,
                  std::span<const EncodedSequence> val_set, const TrainConfig& config);

}  // namespace toc
