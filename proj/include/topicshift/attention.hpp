#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "topicshift/datagen.hpp"
#include "topicshift/rng.hpp"
#include "topicshift/vocab.hpp"

namespace topicshift {

using AttnWeights = Eigen::MatrixXd;

struct AttentionProfile {
  Eigen::VectorXd attention;  // softmax over positions
  Eigen::VectorXd logits;     // length-K classifier scores C f_W(X)
};

enum class InitKind { kZeros, kGaussian };

struct TrainConfig {
  double eta = 0.01;      // step applied to the mean-loss gradient
  int iterations = 8000;
  InitKind init = InitKind::kZeros;
  double init_scale = 0.0;
  std::uint64_t init_seed = 0;
  int record_every = 200;  // checkpoint stride; <= 0 records only the final step
};

struct Checkpoint {
  int step = 0;
  double loss = 0.0;
  AttnWeights weights;
};

struct TrainResult {
  AttnWeights weights;
  std::vector<Checkpoint> checkpoints;
};

namespace detail {

inline Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const double m = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - m).exp();
  return e / e.sum();
}

// Dataset flattened for the training loop. Everything the loss touches lives
// in token space: scores are gathers from Q = E W E^T and label overlaps are
// gathers from C E^T, so the per-iteration cost is independent of d except
// for two small matrix products.
struct CompiledDataset {
  int token_count = 0;
  int sample_count = 0;
  std::vector<int> seq_len;     // per sample
  std::vector<int> offset;      // into tokens
  std::vector<int> tokens;      // concatenated sequences
  std::vector<int> last;        // per sample
  std::vector<int> label;       // per sample

  explicit CompiledDataset(const Dataset& ds) {
    token_count = ds.token_count;
    sample_count = static_cast<int>(ds.samples.size());
    seq_len.reserve(sample_count);
    offset.reserve(sample_count);
    last.reserve(sample_count);
    label.reserve(sample_count);
    for (const auto& s : ds.samples) {
      if (s.tokens.empty()) throw std::invalid_argument("attention: empty sequence");
      for (int t : s.tokens)
        if (t < 0 || t >= token_count) throw std::invalid_argument("attention: token out of range");
      offset.push_back(static_cast<int>(tokens.size()));
      seq_len.push_back(static_cast<int>(s.tokens.size()));
      tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
      last.push_back(s.last());
      label.push_back(s.label);
    }
  }
};

// Accumulates mean loss and, when grad_out is non-null, the mean-loss
// gradient. The per-sample gradient is the outer product of a token-space
// vector with the last-token embedding; summed over samples this becomes
// E^T A E with A accumulated in token space.
inline double loss_and_gradient(const CompiledDataset& ds, const AttnWeights& w,
                                const Vocabulary& v, AttnWeights* grad_out) {
  if (!w.allFinite()) throw std::domain_error("attention: non-finite weights");
  const int K = v.token_count();
  const Eigen::MatrixXd score_table = (v.embeddings * w) * v.embeddings.transpose();  // K x K
  const Eigen::MatrixXd overlap = v.heads * v.embeddings.transpose();                 // K x K
  Eigen::MatrixXd token_grad = Eigen::MatrixXd::Zero(K, K);

  double total = 0.0;
  std::vector<double> z, s, g;
  for (int i = 0; i < ds.sample_count; ++i) {
    const int T = ds.seq_len[i];
    const int* tok = ds.tokens.data() + ds.offset[i];
    const int k = ds.last[i];
    const int y = ds.label[i];
    z.resize(T);
    double zmax = -1e300;
    for (int t = 0; t < T; ++t) {
      z[t] = score_table(tok[t], k);
      zmax = std::max(zmax, z[t]);
    }
    s.resize(T);
    double zsum = 0.0;
    for (int t = 0; t < T; ++t) {
      s[t] = std::exp(z[t] - zmax);
      zsum += s[t];
    }
    double u = 0.0;
    g.resize(T);
    for (int t = 0; t < T; ++t) {
      s[t] /= zsum;
      g[t] = overlap(y, tok[t]);
      u += s[t] * g[t];
    }
    if (!(u > 0.0))
      throw std::domain_error(
          "attention loss: non-positive margin (weight tying or label containment violated)");
    total += -std::log(u);
    if (grad_out) {
      for (int t = 0; t < T; ++t) token_grad(tok[t], k) += s[t] - g[t] * s[t] / u;
    }
  }
  const double n = static_cast<double>(ds.sample_count);
  if (grad_out)
    *grad_out = (v.embeddings.transpose() * token_grad * v.embeddings) / n;
  return total / n;
}

}  // namespace detail

// Attention over positions and classifier scores for one sequence.
inline AttentionProfile forward(std::span<const int> sequence, const AttnWeights& w,
                                const Vocabulary& v) {
  if (sequence.empty()) throw std::invalid_argument("forward: empty sequence");
  if (!w.allFinite()) throw std::domain_error("forward: non-finite weights");
  const int T = static_cast<int>(sequence.size());
  const int K = v.token_count();
  for (int t : sequence)
    if (t < 0 || t >= K) throw std::invalid_argument("forward: token out of range");

  const Eigen::VectorXd key = w * v.embeddings.row(sequence.back()).transpose();
  Eigen::VectorXd scores(T);
  for (int t = 0; t < T; ++t) scores(t) = v.embeddings.row(sequence[t]).dot(key);

  AttentionProfile p;
  p.attention = detail::softmax(scores);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(K);
  for (int t = 0; t < T; ++t) pooled(sequence[t]) += p.attention(t);
  p.logits = (v.heads * v.embeddings.transpose()) * pooled;
  return p;
}

inline double loss(const Dataset& ds, const AttnWeights& w, const Vocabulary& v) {
  if (ds.samples.empty()) throw std::invalid_argument("loss: empty dataset");
  detail::CompiledDataset cds(ds);
  return detail::loss_and_gradient(cds, w, v, nullptr);
}

inline AttnWeights gradient(const Dataset& ds, const AttnWeights& w, const Vocabulary& v) {
  if (ds.samples.empty()) throw std::invalid_argument("gradient: empty dataset");
  detail::CompiledDataset cds(ds);
  AttnWeights g;
  detail::loss_and_gradient(cds, w, v, &g);
  return g;
}

// Full-batch gradient descent on the mean loss. Deterministic given config.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, const Vocabulary& v) {
  if (ds.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.eta <= 0.0) throw std::invalid_argument("train: step size must be positive");
  if (cfg.iterations < 1) throw std::invalid_argument("train: need at least one iteration");
  const int d = v.dim();

  detail::CompiledDataset cds(ds);
  AttnWeights w;
  if (cfg.init == InitKind::kZeros) {
    w = AttnWeights::Zero(d, d);
  } else {
    Rng rng(cfg.init_seed);
    w.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) w(i, j) = cfg.init_scale * rng.next_gaussian();
  }

  TrainResult out;
  AttnWeights grad(d, d);
  for (int step = 1; step <= cfg.iterations; ++step) {
    const double l = detail::loss_and_gradient(cds, w, v, &grad);
    if (!std::isfinite(l))
      throw std::runtime_error("train: loss diverged at step " + std::to_string(step - 1));
    w.noalias() -= cfg.eta * grad;
    const bool record = cfg.record_every > 0 && step % cfg.record_every == 0;
    if (record || step == cfg.iterations) {
      const double lnow = detail::loss_and_gradient(cds, w, v, nullptr);
      if (!std::isfinite(lnow))
        throw std::runtime_error("train: loss diverged at step " + std::to_string(step));
      out.checkpoints.push_back({step, lnow, w});
    }
  }
  out.weights = out.checkpoints.back().weights;
  return out;
}

// Checkpoint files: "step loss" header line then the row-major weight matrix.
inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.precision(17);
  out << c.step << ' ' << c.loss << ' ' << c.weights.rows() << ' ' << c.weights.cols() << '\n';
  for (int i = 0; i < c.weights.rows(); ++i) {
    for (int j = 0; j < c.weights.cols(); ++j) out << (j ? " " : "") << c.weights(i, j);
    out << '\n';
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  Checkpoint c;
  int rows = 0, cols = 0;
  if (!(in >> c.step >> c.loss >> rows >> cols))
    throw std::runtime_error("load_checkpoint: bad header");
  c.weights.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!(in >> c.weights(i, j))) throw std::runtime_error("load_checkpoint: truncated");
  return c;
}

}  // namespace topicshift
