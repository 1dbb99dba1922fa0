#include "toc/lstm.hpp"

#include <cmath>
#include <random>

namespace toc {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_token(const LstmParams& params, const EncodedStep& step) {
  if (step.token_id < 0 || step.token_id >= params.dims.vocab) {
    throw ModelError("token id " + std::to_string(step.token_id) + " outside vocabulary of " +
                     std::to_string(params.dims.vocab));
  }
  for (std::size_t l = 0; l < 3; ++l) {
    const int idx = step.taxonomy_levels[l];
    if (idx != kNoCategory && (idx < 0 || idx >= params.dims.categories[l])) {
      throw ModelError("taxonomy index " + std::to_string(idx) + " outside level " +
                       std::to_string(l + 1) + " table");
    }
  }
}

// Cached activations of one pass over a sequence. Column t holds position t;
// h and c carry an extra leading column for the initial state.
struct Trace {
  Eigen::MatrixXd xh;
  Eigen::MatrixXd gates;
  Eigen::MatrixXd c;
  Eigen::MatrixXd tanh_c;
  Eigen::MatrixXd h;
  Eigen::MatrixXd probs;
};

// Feeds steps[0..n-2] and scores each next token. Returns the mean loss.
double run_forward(const LstmParams& p, const EncodedSequence& seq, Trace& tr) {
  const int n = static_cast<int>(seq.steps.size());
  if (n < 2) throw ModelError("sequence needs at least 2 tokens, got " + std::to_string(n));
  const int T = n - 1;
  const int H = p.dims.hidden;
  const int in = p.dims.input_size();
  tr.xh.resize(in + H, T);
  tr.gates.resize(4 * H, T);
  tr.c = Eigen::MatrixXd::Zero(H, T + 1);
  tr.h = Eigen::MatrixXd::Zero(H, T + 1);
  tr.tanh_c.resize(H, T);
  tr.probs.resize(p.dims.vocab, T);

  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto& step = seq.steps[static_cast<std::size_t>(t)];
    tr.xh.col(t).head(in) = input_vector(p, step);
    tr.xh.col(t).tail(H) = tr.h.col(t);
    Eigen::VectorXd z = p.gate_weight * tr.xh.col(t) + p.gate_bias;
    for (int k = 0; k < 3 * H; ++k) z(k) = sigmoid(z(k));
    for (int k = 3 * H; k < 4 * H; ++k) z(k) = std::tanh(z(k));
    tr.gates.col(t) = z;
    const auto i = z.segment(0, H).array();
    const auto f = z.segment(H, H).array();
    const auto o = z.segment(2 * H, H).array();
    const auto g = z.segment(3 * H, H).array();
    tr.c.col(t + 1) = (f * tr.c.col(t).array() + i * g).matrix();
    tr.tanh_c.col(t) = tr.c.col(t + 1).array().tanh().matrix();
    tr.h.col(t + 1) = (o * tr.tanh_c.col(t).array()).matrix();
    const Eigen::VectorXd logits = p.output_weight * tr.h.col(t + 1) + p.output_bias;
    tr.probs.col(t) = softmax(logits);
    const int target = seq.steps[static_cast<std::size_t>(t + 1)].token_id;
    if (target < 0 || target >= p.dims.vocab) {
      throw ModelError("target token id " + std::to_string(target) + " outside vocabulary");
    }
    // log-softmax directly from logits for accuracy at tiny probabilities
    const double max_logit = logits.maxCoeff();
    const double log_z = max_logit + std::log((logits.array() - max_logit).exp().sum());
    loss += log_z - logits(target);
  }
  return loss / T;
}

void check_finite(const LstmParams& grad) {
  grad.for_each([](std::string_view name, std::span<const double> values) {
    for (double v : values) {
      if (!std::isfinite(v)) throw ModelError("non-finite gradient in " + std::string(name));
    }
  });
}

}  // namespace

ModelDims dims_for(const SequenceCodec& codec) {
  ModelDims dims;
  dims.vocab = static_cast<int>(codec.vocabulary().size());
  dims.categories = codec.category_counts();
  return dims;
}

LstmParams LstmParams::zeros(const ModelDims& d) {
  if (d.vocab < 1 || d.hidden < 1 || d.token_dim < 0 || d.value_dim < 0 || d.taxonomy_dim < 0) {
    throw ModelError("invalid model dimensions");
  }
  LstmParams p;
  p.dims = d;
  p.token_embedding = Eigen::MatrixXd::Zero(d.vocab, d.token_dim);
  p.value_weight = Eigen::VectorXd::Zero(d.value_dim);
  p.value_bias = Eigen::VectorXd::Zero(d.value_dim);
  for (std::size_t l = 0; l < 3; ++l) {
    p.taxonomy_embedding[l] = Eigen::MatrixXd::Zero(std::max(d.categories[l], 0), d.taxonomy_dim);
  }
  p.gate_weight = Eigen::MatrixXd::Zero(4 * d.hidden, d.input_size() + d.hidden);
  p.gate_bias = Eigen::VectorXd::Zero(4 * d.hidden);
  p.output_weight = Eigen::MatrixXd::Zero(d.vocab, d.hidden);
  p.output_bias = Eigen::VectorXd::Zero(d.vocab);
  return p;
}

LstmParams LstmParams::initialized(const ModelDims& d, std::uint64_t seed) {
  LstmParams p = zeros(d);
  Rng rng(seed);
  const auto fill = [&](auto& m, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
  };
  fill(p.token_embedding, 1.0);
  fill(p.value_weight, 1.0);
  for (auto& table : p.taxonomy_embedding) fill(table, 1.0);
  fill(p.gate_weight, 1.0 / std::sqrt(static_cast<double>(d.input_size() + d.hidden)));
  fill(p.output_weight, 1.0 / std::sqrt(static_cast<double>(d.hidden)));
  p.gate_bias.segment(d.hidden, d.hidden).setOnes();
  return p;
}

void LstmParams::for_each(const std::function<void(std::string_view, std::span<double>)>& fn) {
  const auto visit = [&](std::string_view name, auto& m) {
    fn(name, std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
  };
  visit("token_embedding", token_embedding);
  visit("value_weight", value_weight);
  visit("value_bias", value_bias);
  visit("taxonomy_embedding_level1", taxonomy_embedding[0]);
  visit("taxonomy_embedding_level2", taxonomy_embedding[1]);
  visit("taxonomy_embedding_leaf", taxonomy_embedding[2]);
  visit("gate_weight", gate_weight);
  visit("gate_bias", gate_bias);
  visit("output_weight", output_weight);
  visit("output_bias", output_bias);
}

void LstmParams::for_each(
    const std::function<void(std::string_view, std::span<const double>)>& fn) const {
  const_cast<LstmParams*>(this)->for_each(
      [&](std::string_view name, std::span<double> values) {
        fn(name, std::span<const double>(values.data(), values.size()));
      });
}

std::size_t LstmParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, std::span<const double> v) { n += v.size(); });
  return n;
}

bool LstmParams::all_finite() const {
  bool ok = true;
  for_each([&](std::string_view, std::span<const double> v) {
    for (double x : v) ok = ok && std::isfinite(x);
  });
  return ok;
}

void LstmParams::set_zero() {
  for_each([](std::string_view, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
}

void LstmParams::add_scaled(const LstmParams& other, double scale) {
  std::vector<std::span<const double>> theirs;
  other.for_each([&](std::string_view, std::span<const double> v) { theirs.push_back(v); });
  std::size_t k = 0;
  for_each([&](std::string_view name, std::span<double> mine) {
    const auto& src = theirs[k++];
    if (src.size() != mine.size()) throw ModelError("shape mismatch in " + std::string(name));
    for (std::size_t j = 0; j < mine.size(); ++j) mine[j] += scale * src[j];
  });
}

double LstmParams::squared_norm() const {
  double s = 0.0;
  for_each([&](std::string_view, std::span<const double> v) {
    for (double x : v) s += x * x;
  });
  return s;
}

bool LstmParams::operator==(const LstmParams& other) const {
  if (dims != other.dims) return false;
  std::vector<std::span<const double>> theirs;
  other.for_each([&](std::string_view, std::span<const double> v) { theirs.push_back(v); });
  bool equal = true;
  std::size_t k = 0;
  for_each([&](std::string_view, std::span<const double> mine) {
    equal = equal && std::ranges::equal(mine, theirs[k++]);
  });
  return equal;
}

LstmState LstmState::zeros(int hidden) {
  return {Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden)};
}

Eigen::VectorXd input_vector(const LstmParams& p, const EncodedStep& step) {
  check_token(p, step);
  const auto& d = p.dims;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d.input_size());
  x.head(d.token_dim) = p.token_embedding.row(step.token_id).transpose();
  x.segment(d.token_dim, d.value_dim) = step.value_feature * p.value_weight + p.value_bias;
  for (std::size_t l = 0; l < 3; ++l) {
    const int idx = step.taxonomy_levels[l];
    if (idx == kNoCategory) continue;
    x.segment(d.token_dim + d.value_dim + static_cast<int>(l) * d.taxonomy_dim, d.taxonomy_dim) =
        p.taxonomy_embedding[l].row(idx).transpose();
  }
  return x;
}

StepOutput forward_step(const LstmParams& p, const EncodedStep& input, const LstmState& state) {
  const int H = p.dims.hidden;
  if (state.h.size() != H || state.c.size() != H) {
    throw ModelError("state size " + std::to_string(state.h.size()) + " does not match hidden " +
                     std::to_string(H));
  }
  Eigen::VectorXd xh(p.dims.input_size() + H);
  xh << input_vector(p, input), state.h;
  Eigen::VectorXd z = p.gate_weight * xh + p.gate_bias;
  for (int k = 0; k < 3 * H; ++k) z(k) = sigmoid(z(k));
  for (int k = 3 * H; k < 4 * H; ++k) z(k) = std::tanh(z(k));
  StepOutput out;
  out.state.c = (z.segment(H, H).array() * state.c.array() +
                 z.segment(0, H).array() * z.segment(3 * H, H).array())
                    .matrix();
  out.state.h = (z.segment(2 * H, H).array() * out.state.c.array().tanh()).matrix();
  out.logits = p.output_weight * out.state.h + p.output_bias;
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

int argmax(const Eigen::VectorXd& logits) {
  int best = 0;
  for (int k = 1; k < logits.size(); ++k) {
    if (logits(k) > logits(best)) best = k;
  }
  return best;
}

double sequence_loss(const LstmParams& params, const EncodedSequence& seq) {
  Trace trace;
  return run_forward(params, seq, trace);
}

double accumulate_gradients(const LstmParams& p, const EncodedSequence& seq, double weight,
                            LstmParams& grad) {
  Trace tr;
  const double loss = run_forward(p, seq, tr);
  const int T = static_cast<int>(tr.probs.cols());
  const int H = p.dims.hidden;
  const int in = p.dims.input_size();
  const double scale = weight / T;

  // Output head, batched over positions.
  Eigen::MatrixXd dlogits = tr.probs;
  for (int t = 0; t < T; ++t) dlogits(seq.steps[static_cast<std::size_t>(t + 1)].token_id, t) -= 1.0;
  dlogits *= scale;
  grad.output_weight.noalias() += dlogits * tr.h.rightCols(T).transpose();
  grad.output_bias += dlogits.rowwise().sum();
  const Eigen::MatrixXd dh_head = p.output_weight.transpose() * dlogits;

  // Recurrence, newest position first.
  Eigen::MatrixXd dz(4 * H, T);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  const auto w_h = p.gate_weight.rightCols(H);
  for (int t = T - 1; t >= 0; --t) {
    const auto gates = tr.gates.col(t).array();
    const auto i = gates.segment(0, H);
    const auto f = gates.segment(H, H);
    const auto o = gates.segment(2 * H, H);
    const auto g = gates.segment(3 * H, H);
    const auto tanh_c = tr.tanh_c.col(t).array();

    const Eigen::ArrayXd dh = (dh_head.col(t) + dh_next).array();
    const Eigen::ArrayXd dc = dh * o * (1.0 - tanh_c.square()) + dc_next.array();
    dz.col(t).segment(0, H) = (dc * g * i * (1.0 - i)).matrix();
    dz.col(t).segment(H, H) = (dc * tr.c.col(t).array() * f * (1.0 - f)).matrix();
    dz.col(t).segment(2 * H, H) = (dh * tanh_c * o * (1.0 - o)).matrix();
    dz.col(t).segment(3 * H, H) = (dc * i * (1.0 - g.square())).matrix();
    dc_next = (dc * f).matrix();
    dh_next.noalias() = w_h.transpose() * dz.col(t);
  }
  grad.gate_weight.noalias() += dz * tr.xh.transpose();
  grad.gate_bias += dz.rowwise().sum();

  // Scatter input gradients into the embedding tables.
  const Eigen::MatrixXd dx = p.gate_weight.leftCols(in).transpose() * dz;
  const auto& d = p.dims;
  for (int t = 0; t < T; ++t) {
    const auto& step = seq.steps[static_cast<std::size_t>(t)];
    grad.token_embedding.row(step.token_id) += dx.col(t).head(d.token_dim).transpose();
    const auto dv = dx.col(t).segment(d.token_dim, d.value_dim);
    grad.value_weight += step.value_feature * dv;
    grad.value_bias += dv;
    for (std::size_t l = 0; l < 3; ++l) {
      const int idx = step.taxonomy_levels[l];
      if (idx == kNoCategory) continue;
      grad.taxonomy_embedding[l].row(idx) +=
          dx.col(t)
              .segment(d.token_dim + d.value_dim + static_cast<int>(l) * d.taxonomy_dim,
                       d.taxonomy_dim)
              .transpose();
    }
  }
  return loss;
}

Gradients backward(const LstmParams& params, const EncodedSequence& seq) {
  Gradients out{LstmParams::zeros(params.dims), 0.0};
  out.loss = accumulate_gradients(params, seq, 1.0, out.grad);
  check_finite(out.grad);
  return out;
}

SequenceRunner::SequenceRunner(const LstmParams& params)
    : params_(&params), state_(LstmState::zeros(params.dims.hidden)) {}

void SequenceRunner::feed(const EncodedStep& step) {
  StepOutput out = forward_step(*params_, step, state_);
  state_ = std::move(out.state);
  logits_ = std::move(out.logits);
  ++length_;
}

void SequenceRunner::feed(const EncodedSequence& seq) {
  for (const auto& step : seq.steps) feed(step);
}

const Eigen::VectorXd& SequenceRunner::logits() const {
  if (length_ == 0) throw ModelError("no tokens fed yet");
  return logits_;
}

AccuracyCount next_token_accuracy(const LstmParams& params, const Vocabulary& vocab,
                                  std::span<const EncodedSequence> seqs) {
  AccuracyCount count;
  for (const auto& seq : seqs) {
    SequenceRunner runner(params);
    for (std::size_t t = 0; t + 1 < seq.steps.size(); ++t) {
      runner.feed(seq.steps[t]);
      const int target = seq.steps[t + 1].token_id;
      if (vocab.kind(target) == TokenKind::symptom) continue;
      ++count.total;
      if (argmax(runner.logits()) == target) ++count.correct;
    }
  }
  return count;
}

}  // namespace toc
