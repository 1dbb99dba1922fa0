#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "toc/seeding.hpp"
#include "toc/trainer.hpp"

namespace toc {

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must be in [0, 1)");
  }
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (c.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(c.grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be positive");
  if (c.early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be >= 1");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"epochs", c.epochs},               {"grad_clip_norm", c.grad_clip_norm},
          {"seed", c.seed},                   {"early_stop_patience", c.early_stop_patience},
          {"batch_size", c.batch_size}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  return c;
}

Adam::Adam(const ModelDims& dims, const TrainConfig& config)
    : config_(config), m_(LstmParams::zeros(dims)), v_(LstmParams::zeros(dims)) {}

void Adam::step(LstmParams& params, const LstmParams& grad) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;

  std::vector<std::span<const double>> g;
  grad.for_each([&](std::string_view, std::span<const double> v) { g.push_back(v); });
  std::vector<std::span<double>> m;
  m_.for_each([&](std::string_view, std::span<double> v) { m.push_back(v); });
  std::vector<std::span<double>> s;
  v_.for_each([&](std::string_view, std::span<double> v) { s.push_back(v); });

  std::size_t k = 0;
  params.for_each([&](std::string_view, std::span<double> w) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[k][j];
      m[k][j] = b1 * m[k][j] + (1.0 - b1) * gj;
      s[k][j] = b2 * s[k][j] + (1.0 - b2) * gj * gj;
      const double m_hat = m[k][j] / correction1;
      const double v_hat = s[k][j] / correction2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    ++k;
  });
}

double clip_gradient(LstmParams& grad, double max_norm) {
  const double norm = std::sqrt(grad.squared_norm());
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    grad.for_each([&](std::string_view, std::span<double> v) {
      for (double& x : v) x *= scale;
    });
  }
  return norm;
}

double mean_loss(const LstmParams& params, std::span<const EncodedSequence> seqs) {
  if (seqs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& seq : seqs) total += sequence_loss(params, seq);
  return total / static_cast<double>(seqs.size());
}

TrainResult train(LstmParams params, std::span<const EncodedSequence> train_set,
                  std::span<const EncodedSequence> val_set, const TrainConfig& config) {
  validate(config);
  if (train_set.empty()) throw TrainingError("training split is empty");

  Adam adam(params.dims, config);
  LstmParams grad = LstmParams::zeros(params.dims);
  TrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::ranges::shuffle(order, rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      const double weight = 1.0 / static_cast<double>(end - start);
      grad.set_zero();
      for (std::size_t k = start; k < end; ++k) {
        const double loss = accumulate_gradients(params, train_set[order[k]], weight, grad);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "training diverged: loss " << loss << " at epoch " << epoch << ", sequence "
              << order[k];
          throw TrainingError(msg.str());
        }
        epoch_loss += loss;
      }
      if (!grad.all_finite()) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch));
      }
      clip_gradient(grad, config.grad_clip_norm);
      adam.step(params, grad);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(train_set.size());
    stats.val_loss = mean_loss(params, val_set);
    result.curve.push_back(stats);

    if (val_set.empty()) {
      result.params = params;
      result.best_epoch = epoch;
      continue;
    }
    if (!std::isfinite(stats.val_loss)) {
      throw TrainingError("validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace toc
