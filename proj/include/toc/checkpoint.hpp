#pragma once

#include <string>

#include "toc/trainer.hpp"

namespace toc {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  LstmParams params;
  std::uint64_t vocab_hash = 0;
  bool symptom_token = true;
  TrainConfig train_config;
};

/// Structured-text container (JSON) with every tensor, the vocabulary hash
/// and the training configuration. Output is byte-for-byte deterministic.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

Checkpoint parse_checkpoint(std::string_view text);

/// Loads and checks the vocabulary hash against the active codec.
Checkpoint load_checkpoint(const std::string& path, const SequenceCodec& codec);

}  // namespace toc
