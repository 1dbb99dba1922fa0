#include "toc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "toc/fingerprint.hpp"

namespace toc {

namespace {

constexpr const char* kFormat = "toc-lstm-checkpoint";

nlohmann::ordered_json dims_json(const ModelDims& d) {
  nlohmann::ordered_json j;
  j["vocab"] = d.vocab;
  j["categories"] = d.categories;
  j["token_dim"] = d.token_dim;
  j["value_dim"] = d.value_dim;
  j["taxonomy_dim"] = d.taxonomy_dim;
  j["hidden"] = d.hidden;
  return j;
}

ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.vocab = j.at("vocab").get<int>();
  d.categories = j.at("categories").get<CategoryCounts>();
  d.token_dim = j.at("token_dim").get<int>();
  d.value_dim = j.at("value_dim").get<int>();
  d.taxonomy_dim = j.at("taxonomy_dim").get<int>();
  d.hidden = j.at("hidden").get<int>();
  return d;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["vocab_hash"] = to_hex(checkpoint.vocab_hash);
  j["symptom_token"] = checkpoint.symptom_token;
  j["dims"] = dims_json(checkpoint.params.dims);
  // Re-keyed into an ordered object so the file layout is stable.
  const nlohmann::json train_json = to_json(checkpoint.train_config);
  nlohmann::ordered_json train;
  for (const auto& [key, value] : train_json.items()) train[key] = value;
  j["train_config"] = train;
  nlohmann::ordered_json tensors;
  checkpoint.params.for_each([&](std::string_view name, std::span<const double> values) {
    tensors[std::string(name)] = std::vector<double>(values.begin(), values.end());
  });
  j["tensors"] = tensors;
  return j.dump() + "\n";
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(checkpoint);
}

Checkpoint parse_checkpoint(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("checkpoint parse failure: ") + e.what());
  }
  if (j.value("format", "") != kFormat) throw ModelError("not a model checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw ModelError("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump());
  }
  Checkpoint cp;
  cp.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
  cp.symptom_token = j.at("symptom_token").get<bool>();
  cp.train_config = train_config_from_json(j.at("train_config"));
  cp.params = LstmParams::zeros(dims_from_json(j.at("dims")));
  const auto& tensors = j.at("tensors");
  cp.params.for_each([&](std::string_view name, std::span<double> values) {
    const auto stored = tensors.at(std::string(name)).get<std::vector<double>>();
    if (stored.size() != values.size()) {
      throw ModelError("checkpoint tensor " + std::string(name) + " has " +
                       std::to_string(stored.size()) + " values, expected " +
                       std::to_string(values.size()));
    }
    std::ranges::copy(stored, values.begin());
  });
  return cp;
}

Checkpoint load_checkpoint(const std::string& path, const SequenceCodec& codec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Checkpoint cp = parse_checkpoint(buffer.str());
  if (cp.vocab_hash != codec.vocabulary().hash()) {
    throw ModelError("checkpoint vocabulary hash " + to_hex(cp.vocab_hash) +
                     " does not match the active config (" +
                     to_hex(codec.vocabulary().hash()) + ")");
  }
  const ModelDims expected = dims_for(codec);
  if (cp.params.dims.vocab != expected.vocab || cp.params.dims.categories != expected.categories) {
    throw ModelError("checkpoint dimensions do not match the active config");
  }
  return cp;
}

}  // namespace toc
