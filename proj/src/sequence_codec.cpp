#include "toc/sequence_codec.hpp"

#include <algorithm>

#include "toc/fingerprint.hpp"

namespace toc {

namespace {

std::vector<std::string> sorted_ids(const auto& items) {
  std::vector<std::string> ids;
  for (const auto& item : items) ids.push_back(item.id);
  std::ranges::sort(ids);
  return ids;
}

int index_in(const std::vector<std::string>& sorted, const std::string& id) {
  auto it = std::ranges::lower_bound(sorted, id);
  if (it == sorted.end() || *it != id) return kNoCategory;
  return static_cast<int>(it - sorted.begin());
}

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::start:
      return "start";
    case TokenKind::stop:
      return "stop";
    case TokenKind::symptom:
      return "symptom";
    case TokenKind::read:
      return "read";
    case TokenKind::act:
      return "act";
  }
  return "start";
}

Vocabulary::Vocabulary(const RobotConfig& config) {
  tokens_.push_back({TokenKind::start, {}});
  tokens_.push_back({TokenKind::stop, {}});
  for (auto& id : sorted_ids(config.faults)) tokens_.push_back({TokenKind::symptom, std::move(id)});
  for (auto& id : sorted_ids(config.sensors)) tokens_.push_back({TokenKind::read, std::move(id)});
  for (auto& id : sorted_ids(config.actions)) tokens_.push_back({TokenKind::act, std::move(id)});
}

const Token& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw CodecError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::find(const Token& token) const {
  // Tokens are sorted within each kind block, and kinds are in enum order.
  auto it = std::ranges::lower_bound(tokens_, token);
  if (it == tokens_.end() || *it != token) return std::nullopt;
  return static_cast<int>(it - tokens_.begin());
}

int Vocabulary::id_of(const Token& token) const {
  if (auto id = find(token)) return *id;
  throw CodecError("unknown " + std::string(to_string(token.kind)) + " token '" + token.entity +
                   "'");
}

int Vocabulary::symptom_id(std::string_view fault_id) const {
  return id_of({TokenKind::symptom, std::string(fault_id)});
}
int Vocabulary::read_id(std::string_view sensor_id) const {
  return id_of({TokenKind::read, std::string(sensor_id)});
}
int Vocabulary::act_id(std::string_view action_id) const {
  return id_of({TokenKind::act, std::string(action_id)});
}

std::uint64_t Vocabulary::hash() const {
  std::string bytes;
  for (const auto& t : tokens_) {
    bytes += to_string(t.kind);
    bytes += ':';
    bytes += t.entity;
    bytes += '\n';
  }
  return fnv1a64(bytes);
}

Vocabulary build_vocabulary(const RobotConfig& config) { return Vocabulary(config); }

Token decode_token(const Vocabulary& vocab, int token_id) { return vocab.token(token_id); }

SequenceCodec::SequenceCodec(const RobotConfig& config, bool symptom_token)
    : config_(&config), vocab_(config), symptom_token_(symptom_token) {
  for (const auto& node : config.taxonomy) {
    if (node.level == 1) level1_.push_back(node.id);
    if (node.level == 2) level2_.push_back(node.id);
    if (node.level == kLeafLevel) leaves_.push_back(node.id);
  }
  std::ranges::sort(level1_);
  std::ranges::sort(level2_);
  std::ranges::sort(leaves_);
  counts_ = {static_cast<int>(level1_.size()), static_cast<int>(level2_.size()),
             static_cast<int>(leaves_.size())};
}

std::array<int, 3> SequenceCodec::levels_of(const std::string& leaf_id) const {
  const auto path = taxonomy_path(*config_, leaf_id);
  return {index_in(level1_, path[1]), index_in(level2_, path[2]), index_in(leaves_, path[3])};
}

EncodedStep SequenceCodec::start() const {
  return {vocab_.start_id(), 0.0, {kNoCategory, kNoCategory, kNoCategory}};
}

EncodedStep SequenceCodec::stop() const {
  return {vocab_.stop_id(), 0.0, {kNoCategory, kNoCategory, kNoCategory}};
}

EncodedStep SequenceCodec::symptom(std::string_view fault_id) const {
  return {vocab_.symptom_id(fault_id), 0.0, {kNoCategory, kNoCategory, kNoCategory}};
}

EncodedStep SequenceCodec::read(std::string_view sensor_id, double value) const {
  const SensorSpec* sensor = config_->find_sensor(sensor_id);
  if (sensor == nullptr) throw CodecError("unknown sensor '" + std::string(sensor_id) + "'");
  const double range = sensor->max_value - sensor->min_value;
  if (!(range > 0.0)) throw CodecError("sensor '" + sensor->id + "' has an empty value range");
  EncodedStep step;
  step.token_id = vocab_.read_id(sensor_id);
  step.value_feature = std::clamp((value - sensor->min_value) / range, 0.0, 1.0);
  step.taxonomy_levels = levels_of(sensor->taxonomy_leaf);
  return step;
}

EncodedStep SequenceCodec::act(std::string_view action_id) const {
  const ActionSpec* action = config_->find_action(action_id);
  if (action == nullptr) throw CodecError("unknown action '" + std::string(action_id) + "'");
  EncodedStep step;
  step.token_id = vocab_.act_id(action_id);
  step.taxonomy_levels = levels_of(action->taxonomy_leaf);
  return step;
}

EncodedStep SequenceCodec::step(const Step& s) const {
  if (const auto* r = std::get_if<ReadStep>(&s)) return read(r->sensor_id, r->value);
  return act(std::get<ActStep>(s).action_id);
}

EncodedSequence SequenceCodec::prompt(std::string_view fault_id) const {
  EncodedSequence seq;
  seq.fault_id = std::string(fault_id);
  seq.steps.push_back(start());
  if (symptom_token_) {
    seq.steps.push_back(symptom(fault_id));
  } else if (config_->find_fault(fault_id) == nullptr) {
    throw CodecError("unknown fault '" + std::string(fault_id) + "'");
  }
  return seq;
}

EncodedSequence SequenceCodec::prefix(const SessionLog& log, std::size_t step_count) const {
  EncodedSequence seq = prompt(log.fault_id);
  const std::size_t n = std::min(step_count, log.steps.size());
  for (std::size_t i = 0; i < n; ++i) seq.steps.push_back(step(log.steps[i]));
  return seq;
}

EncodedSequence SequenceCodec::encode(const SessionLog& log) const {
  EncodedSequence seq = prefix(log, log.steps.size());
  seq.steps.push_back(stop());
  return seq;
}

EncodedSequence encode_session(const Vocabulary& vocab, const RobotConfig& config,
                               const SessionLog& log) {
  SequenceCodec codec(config);
  if (codec.vocabulary().hash() != vocab.hash()) {
    throw CodecError("vocabulary does not belong to this config");
  }
  return codec.encode(log);
}

nlohmann::json to_json(const EncodedSequence& seq, const Vocabulary& vocab) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : seq.steps) {
    const Token& t = vocab.token(s.token_id);
    steps.push_back({{"token_id", s.token_id},
                     {"kind", to_string(t.kind)},
                     {"entity", t.entity},
                     {"value_feature", s.value_feature},
                     {"taxonomy_levels", s.taxonomy_levels}});
  }
  return {{"fault_id", seq.fault_id}, {"steps", steps}};
}

}  // namespace toc
