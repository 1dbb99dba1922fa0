#pragma once

// Token vocabulary and the encoding of session logs into model inputs:
// token id, normalized sensor value and taxonomy category indices.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "toc/diagnosis_sim.hpp"

namespace toc {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TokenKind { start, stop, symptom, read, act };

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::start;
  // Fault, sensor or action id; empty for START and STOP.
  std::string entity;

  bool is_step() const { return kind == TokenKind::read || kind == TokenKind::act; }
  bool operator==(const Token&) const = default;
  auto operator<=>(const Token&) const = default;
};

/// Bijection between tokens and dense ids. Ids are ordered by kind
/// (START, STOP, SYMPTOM, READ, ACT) and then by entity id.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(const RobotConfig& config);

  std::size_t size() const { return tokens_.size(); }
  const Token& token(int id) const;
  int id_of(const Token& token) const;
  std::optional<int> find(const Token& token) const;

  int start_id() const { return 0; }
  int stop_id() const { return 1; }
  int symptom_id(std::string_view fault_id) const;
  int read_id(std::string_view sensor_id) const;
  int act_id(std::string_view action_id) const;

  TokenKind kind(int id) const { return token(id).kind; }
  const std::vector<Token>& tokens() const { return tokens_; }

  /// Stable 64-bit hash of the ordered token list, stored in checkpoints.
  std::uint64_t hash() const;

 private:
  std::vector<Token> tokens_;
};

Vocabulary build_vocabulary(const RobotConfig& config);

/// Throws CodecError for ids outside [0, size).
Token decode_token(const Vocabulary& vocab, int token_id);

inline constexpr int kNoCategory = -1;

struct EncodedStep {
  int token_id = 0;
  // Normalized reading in [0, 1] for READ tokens, 0 otherwise.
  double value_feature = 0.0;
  // Indices of the level-1 category, level-2 category and leaf; kNoCategory
  // for tokens that do not name a sensor or actuator.
  std::array<int, 3> taxonomy_levels = {kNoCategory, kNoCategory, kNoCategory};

  bool operator==(const EncodedStep&) const = default;
};

struct EncodedSequence {
  std::vector<EncodedStep> steps;
  std::string fault_id;

  std::size_t size() const { return steps.size(); }
  bool operator==(const EncodedSequence&) const = default;
};

/// Number of distinct categories per taxonomy level (level-1, level-2, leaf).
using CategoryCounts = std::array<int, 3>;

/// Encodes logs and single steps against one config. Holds a reference to
/// the config, which must outlive it.
class SequenceCodec {
 public:
  explicit SequenceCodec(const RobotConfig& config, bool symptom_token = true);

  const Vocabulary& vocabulary() const { return vocab_; }
  const RobotConfig& config() const { return *config_; }
  const CategoryCounts& category_counts() const { return counts_; }
  bool uses_symptom_token() const { return symptom_token_; }

  EncodedStep start() const;
  EncodedStep stop() const;
  EncodedStep symptom(std::string_view fault_id) const;
  EncodedStep read(std::string_view sensor_id, double value) const;
  EncodedStep act(std::string_view action_id) const;
  EncodedStep step(const Step& step) const;

  /// START, SYMPTOM (when enabled) and nothing else: the prefix an
  /// autonomous rollout starts from.
  EncodedSequence prompt(std::string_view fault_id) const;

  /// prompt(fault) followed by the first `step_count` steps of the log,
  /// without STOP.
  EncodedSequence prefix(const SessionLog& log, std::size_t step_count) const;

  /// START, SYMPTOM, one token per step, STOP.
  EncodedSequence encode(const SessionLog& log) const;

  /// Number of tokens before the first diagnostic step.
  std::size_t prompt_length() const { return symptom_token_ ? 2 : 1; }

 private:
  std::array<int, 3> levels_of(const std::string& leaf_id) const;

  const RobotConfig* config_;
  Vocabulary vocab_;
  bool symptom_token_;
  CategoryCounts counts_{};
  std::vector<std::string> level1_;
  std::vector<std::string> level2_;
  std::vector<std::string> leaves_;
};

EncodedSequence encode_session(const Vocabulary& vocab, const RobotConfig& config,
                               const SessionLog& log);

/// Debug dump, one JSON object per sequence.
nlohmann::json to_json(const EncodedSequence& seq, const Vocabulary& vocab);

}  // namespace toc
