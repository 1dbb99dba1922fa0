#pragma once

// Single-layer LSTM next-token model over encoded diagnosis sequences.
//
// Input at each position is the concatenation
//   [token embedding | value projection | level-1 | level-2 | leaf embedding]
// where the value projection is value_feature * value_weight + value_bias
// and taxonomy rows are zero for tokens without a taxonomy entry.
//
// Gates use one stacked matrix over [x; h_prev] with row blocks ordered
// input, forget, output, candidate:
//   i = sigmoid(z_i), f = sigmoid(z_f), o = sigmoid(z_o), g = tanh(z_g)
//   c' = f * c + i * g,  h' = o * tanh(c'),  logits = W_out h' + b_out

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "toc/sequence_codec.hpp"

namespace toc {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelDims {
  int vocab = 0;
  CategoryCounts categories{};
  int token_dim = 16;
  int value_dim = 4;
  int taxonomy_dim = 4;
  int hidden = 64;

  int input_size() const { return token_dim + value_dim + 3 * taxonomy_dim; }
  bool operator==(const ModelDims&) const = default;
};

ModelDims dims_for(const SequenceCodec& codec);

struct LstmParams {
  ModelDims dims;
  Eigen::MatrixXd token_embedding;                    // vocab x token_dim
  Eigen::VectorXd value_weight;                       // value_dim
  Eigen::VectorXd value_bias;                         // value_dim
  std::array<Eigen::MatrixXd, 3> taxonomy_embedding;  // categories[l] x taxonomy_dim
  Eigen::MatrixXd gate_weight;                        // 4 hidden x (input + hidden)
  Eigen::VectorXd gate_bias;                          // 4 hidden
  Eigen::MatrixXd output_weight;                      // vocab x hidden
  Eigen::VectorXd output_bias;                        // vocab

  static LstmParams zeros(const ModelDims& dims);
  /// Gaussian init scaled by 1/sqrt(fan_in); forget-gate bias set to 1.
  static LstmParams initialized(const ModelDims& dims, std::uint64_t seed);

  /// Visits every tensor as a flat span, in a fixed order.
  void for_each(const std::function<void(std::string_view, std::span<double>)>& fn);
  void for_each(const std::function<void(std::string_view, std::span<const double>)>& fn) const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  void set_zero();
  /// this += scale * other
  void add_scaled(const LstmParams& other, double scale);
  double squared_norm() const;

  bool operator==(const LstmParams& other) const;
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static LstmState zeros(int hidden);
};

struct StepOutput {
  Eigen::VectorXd logits;
  LstmState state;
};

/// Builds the input vector for one encoded step.
Eigen::VectorXd input_vector(const LstmParams& params, const EncodedStep& step);

/// One recurrent step. Throws ModelError on dimension mismatch.
StepOutput forward_step(const LstmParams& params, const EncodedStep& input,
                        const LstmState& state);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Index of the largest logit; ties go to the lowest id.
int argmax(const Eigen::VectorXd& logits);

/// Mean cross-entropy of predicting steps[t + 1] from steps[0..t].
/// Throws ModelError for sequences shorter than 2.
double sequence_loss(const LstmParams& params, const EncodedSequence& seq);

struct Gradients {
  LstmParams grad;
  double loss = 0.0;
};

/// Exact gradient of sequence_loss by backpropagation through time.
/// Throws ModelError naming the tensor if a non-finite value appears.
Gradients backward(const LstmParams& params, const EncodedSequence& seq);

/// Adds the gradient of `weight * sequence_loss` into `grad` and returns the
/// unweighted loss.
double accumulate_gradients(const LstmParams& params, const EncodedSequence& seq, double weight,
                            LstmParams& grad);

/// Runs a prefix through the model and keeps the recurrent state, so a
/// rollout can extend it one token at a time.
class SequenceRunner {
 public:
  explicit SequenceRunner(const LstmParams& params);

  void feed(const EncodedStep& step);
  void feed(const EncodedSequence& seq);

  /// Logits after the last fed token. Requires at least one feed.
  const Eigen::VectorXd& logits() const;
  std::size_t length() const { return length_; }

 private:
  const LstmParams* params_;
  LstmState state_;
  Eigen::VectorXd logits_;
  std::size_t length_ = 0;
};

/// Next-token accuracy over positions whose target is a diagnostic step or
/// STOP (the symptom token is given, never predicted in use).
struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

AccuracyCount next_token_accuracy(const LstmParams& params, const Vocabulary& vocab,
                                  std::span<const EncodedSequence> seqs);

}  // namespace toc
