#include <cmath>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "toc/pipeline.hpp"

using namespace toc;

namespace {

// One training log per fault for the first `n` faults.
std::vector<EncodedSequence> distinct_fault_sequences(const SequenceCodec& codec, std::size_t n) {
  GenerateOptions o;
  o.sessions_per_fault = 3;
  const auto kept = filter_dataset(generate_sessions(codec.config(), o)).kept;
  std::vector<EncodedSequence> out;
  std::set<std::string> seen;
  for (const auto& log : kept) {
    if (out.size() < n && seen.insert(log.fault_id).second) out.push_back(codec.encode(log));
  }
  return out;
}

}  // namespace

TEST_CASE("Adam matches the bias-corrected update by hand") {
  ModelDims d;
  d.vocab = 2;
  d.categories = {1, 1, 1};
  d.token_dim = 1;
  d.value_dim = 1;
  d.taxonomy_dim = 1;
  d.hidden = 1;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  LstmParams w = LstmParams::zeros(d);
  LstmParams g = LstmParams::zeros(d);
  Adam adam(d, cfg);

  const double g1 = 0.5, g2 = -2.0;
  g.output_bias(0) = g1;
  adam.step(w, g);
  // First step: m_hat = g, v_hat = g^2, so the move is lr * sign(g).
  CHECK(w.output_bias(0) == doctest::Approx(-0.1 * g1 / (std::abs(g1) + 1e-8)));

  g.output_bias(0) = g2;
  adam.step(w, g);
  const double m = 0.9 * (0.1 * g1) + 0.1 * g2;
  const double v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  const double expected = -0.1 * g1 / (std::abs(g1) + 1e-8) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
  CHECK(w.output_bias(0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(w.output_bias(1) == 0.0);
  CHECK(adam.steps_taken() == 2);
}

TEST_CASE("gradient clipping rescales to the global norm") {
  ModelDims d;
  d.vocab = 2;
  d.categories = {1, 1, 1};
  d.hidden = 1;
  LstmParams g = LstmParams::zeros(d);
  g.output_bias << 3.0, 4.0;
  CHECK(clip_gradient(g, 10.0) == doctest::Approx(5.0));
  CHECK(g.output_bias(0) == 3.0);
  CHECK(clip_gradient(g, 1.0) == doctest::Approx(5.0));
  CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(1.0));
  CHECK(g.output_bias(1) / g.output_bias(0) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("train config validation and serialization") {
  TrainConfig c;
  CHECK(train_config_from_json(to_json(c)) == c);
  c.learning_rate = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = {};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  const RobotConfig& rc = default_robot_config();
  const SequenceCodec codec(rc);
  CHECK_THROWS_AS(train(LstmParams::zeros(dims_for(codec)), {}, {}, TrainConfig{}), TrainingError);
}

TEST_CASE("training is deterministic and lowers the loss") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto seqs = distinct_fault_sequences(codec, 12);
  const std::span<const EncodedSequence> train_set(seqs.data(), 10);
  const std::span<const EncodedSequence> val_set(seqs.data() + 10, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  const LstmParams init = LstmParams::initialized(dims_for(codec), 4);

  const TrainResult a = train(init, train_set, val_set, cfg);
  const TrainResult b = train(init, train_set, val_set, cfg);
  CHECK(a.params == b.params);
  REQUIRE(a.curve.size() == 5);
  CHECK(a.curve.back().train_loss < a.curve.front().train_loss);
  CHECK(mean_loss(a.params, train_set) < mean_loss(init, train_set));

  cfg.seed = 99;
  CHECK_FALSE(train(init, train_set, val_set, cfg).params == a.params);
}

TEST_CASE("early stopping restores the best validation epoch") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto seqs = distinct_fault_sequences(codec, 12);
  const std::span<const EncodedSequence> train_set(seqs.data(), 10);
  const std::span<const EncodedSequence> val_set(seqs.data() + 10, 2);
  // Held-out faults never seen in training: validation loss turns up
  // quickly under a large learning rate.
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 60;
  cfg.early_stop_patience = 3;
  const TrainResult r = train(LstmParams::initialized(dims_for(codec), 4), train_set, val_set, cfg);
  REQUIRE(r.best_epoch >= 0);
  CHECK(r.early_stopped);
  CHECK(static_cast<int>(r.curve.size()) == r.best_epoch + 1 + cfg.early_stop_patience);
  double best = r.curve.front().val_loss;
  for (const auto& e : r.curve) best = std::min(best, e.val_loss);
  CHECK(r.curve[static_cast<std::size_t>(r.best_epoch)].val_loss == best);
  CHECK(mean_loss(r.params, val_set) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("the model can memorize ten sequences") {
  const RobotConfig& c = default_robot_config();
  const SequenceCodec codec(c);
  const auto seqs = distinct_fault_sequences(codec, 10);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 1;
  cfg.epochs = 200;
  const TrainResult r = train(LstmParams::initialized(dims_for(codec), 1), seqs, {}, cfg);
  const AccuracyCount acc = next_token_accuracy(r.params, codec.vocabulary(), seqs);
  MESSAGE("memorization accuracy " << acc.rate() << " over " << acc.total << " targets");
  CHECK(acc.rate() > 0.99);
}
