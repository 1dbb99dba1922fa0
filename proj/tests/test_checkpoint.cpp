#include "doctest.h"
#include "support.hpp"
#include "toc/checkpoint.hpp"
#include "toc/fingerprint.hpp"

using namespace toc;

namespace {

Checkpoint make_checkpoint(const SequenceCodec& codec) {
  Checkpoint cp;
  cp.params = LstmParams::initialized(dims_for(codec), 12);
  cp.vocab_hash = codec.vocabulary().hash();
  cp.symptom_token = codec.uses_symptom_token();
  cp.train_config.seed = 5;
  return cp;
}

}  // namespace

TEST_CASE("checkpoint round-trips bit for bit") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const Checkpoint cp = make_checkpoint(codec);
  const std::string text = serialize_checkpoint(cp);
  const Checkpoint back = parse_checkpoint(text);
  CHECK(back.params == cp.params);
  CHECK(back.vocab_hash == cp.vocab_hash);
  CHECK(back.train_config == cp.train_config);
  CHECK(serialize_checkpoint(back) == text);

  testing::TempDir dir("ckpt");
  save_checkpoint(dir.file("m.ckpt"), cp);
  CHECK(fingerprint_file(dir.file("m.ckpt")) == fingerprint(text));
  CHECK(load_checkpoint(dir.file("m.ckpt"), codec).params == cp.params);
}

TEST_CASE("checkpoint from a different catalog is rejected") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  testing::TempDir dir("ckpt-mismatch");
  save_checkpoint(dir.file("m.ckpt"), make_checkpoint(codec));

  auto j = testing::default_config_json();
  j["faults"].erase(j["faults"].size() - 1);
  const RobotConfig other = load_robot_config(j.dump());
  const SequenceCodec other_codec(other);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("m.ckpt"), other_codec),
                       doctest::Contains("vocabulary hash"), ModelError);
}

TEST_CASE("corrupt checkpoints fail loudly") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  auto j = nlohmann::json::parse(serialize_checkpoint(make_checkpoint(codec)));

  CHECK_THROWS_AS(parse_checkpoint("not json"), ModelError);
  auto wrong_format = j;
  wrong_format["format"] = "other";
  CHECK_THROWS_AS(parse_checkpoint(wrong_format.dump()), ModelError);
  auto wrong_version = j;
  wrong_version["version"] = 99;
  CHECK_THROWS_AS(parse_checkpoint(wrong_version.dump()), ModelError);
  auto short_tensor = j;
  short_tensor["tensors"]["output_bias"].erase(0);
  CHECK_THROWS_WITH_AS(parse_checkpoint(short_tensor.dump()), doctest::Contains("output_bias"), ModelError);
}
