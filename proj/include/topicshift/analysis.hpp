#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "topicshift/attention.hpp"
#include "topicshift/rng.hpp"
#include "topicshift/tpg.hpp"
#include "topicshift/vocab.hpp"

namespace topicshift {

// Numerical-equality threshold on the classifier score scale. Stands in for
// rounding the attention to a fixed number of decimals.
struct GroupingTolerance {
  double eps = 5e-4;
};

struct Prediction {
  int token = 0;              // lowest token id attaining the maximum
  std::set<int> top_set;      // tokens within eps of the maximal score
  Eigen::VectorXd probs;      // softmax over the K classifier scores
  Eigen::VectorXd logits;
};

// Greedy next-token prediction plus the empirical highest-probability
// component: all tokens whose classifier score is within eps of the maximum.
inline Prediction predict_next(std::span<const int> sequence, const AttnWeights& w,
                               const Vocabulary& v, GroupingTolerance tol = {}) {
  const AttentionProfile profile = forward(sequence, w, v);
  if (!profile.logits.allFinite()) throw std::domain_error("predict_next: non-finite scores");
  Prediction p;
  p.logits = profile.logits;
  p.probs = detail::softmax(profile.logits);
  const double top = profile.logits.maxCoeff();
  for (int k = 0; k < profile.logits.size(); ++k)
    if (profile.logits(k) >= top - tol.eps) p.top_set.insert(k);
  p.token = *p.top_set.begin();
  return p;
}

enum class Outcome { kKeepTopic, kAmbiguous, kChangeTopic };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kKeepTopic: return "keep";
    case Outcome::kAmbiguous: return "ambiguous";
    case Outcome::kChangeTopic: return "change";
  }
  return "?";
}

struct OutcomeRecord {
  std::vector<int> sequence;
  int yhat_a = 0;
  int yhat_ab = 0;
  std::set<int> hp_scc_a;        // highest-probability set under the base model
  std::set<int> hp_scc_ab;       // same under the mixed model
  std::set<int> priority_scc_a;  // highest-priority tokens of the sequence
  std::map<int, int> counts;
  Outcome outcome = Outcome::kKeepTopic;
  bool freq_condition = false;
  bool stable = true;  // same outcome under eps/2 and 2*eps
};

// True iff some sequence token outside the highest-priority set strictly
// outnumbers every sequence token inside it.
inline bool frequency_condition(std::span<const int> sequence, const Topic& topic_a) {
  const Tpg& g = topic_a.graphs[sequence.back()];
  const std::set<int> top = highest_priority_scc(g, sequence);
  std::map<int, int> counts;
  for (int t : sequence) ++counts[t];
  int inside_max = 0;
  for (int t : top) inside_max = std::max(inside_max, counts[t]);
  for (const auto& [tok, cnt] : counts) {
    if (top.count(tok)) continue;
    bool beats_all = true;
    for (int t : top)
      if (cnt <= counts[t]) {
        beats_all = false;
        break;
      }
    if (beats_all) return true;
  }
  return false;
}

namespace detail {

inline Outcome outcome_of(const std::set<int>& set_a, const std::set<int>& set_ab) {
  const bool ab_in_a = std::includes(set_a.begin(), set_a.end(), set_ab.begin(), set_ab.end());
  if (ab_in_a) return Outcome::kKeepTopic;
  const bool a_in_ab = std::includes(set_ab.begin(), set_ab.end(), set_a.begin(), set_a.end());
  return a_in_ab ? Outcome::kAmbiguous : Outcome::kChangeTopic;
}

}  // namespace detail

// Three-way verdict for one sequence: the mixed model keeps the topic when
// its whole top set stays inside the base model's, is ambiguous when the base
// top set is contained in the (larger) mixed one, and changes topic otherwise.
inline OutcomeRecord classify_outcome(std::span<const int> sequence, const AttnWeights& w_a,
                                      const AttnWeights& w_ab, const Topic& topic_a,
                                      const Vocabulary& v, GroupingTolerance tol = {}) {
  if (sequence.empty()) throw std::invalid_argument("classify_outcome: empty sequence");
  const Tpg& g = topic_a.graphs[sequence.back()];
  for (int t : sequence)
    if (!g.nodes.count(t))
      throw std::domain_error("classify_outcome: sequence does not belong to the topic");

  OutcomeRecord rec;
  rec.sequence.assign(sequence.begin(), sequence.end());
  for (int t : sequence) ++rec.counts[t];

  const Prediction pa = predict_next(sequence, w_a, v, tol);
  const Prediction pab = predict_next(sequence, w_ab, v, tol);
  rec.yhat_a = pa.token;
  rec.yhat_ab = pab.token;
  rec.hp_scc_a = pa.top_set;
  rec.hp_scc_ab = pab.top_set;
  rec.priority_scc_a = highest_priority_scc(g, sequence);
  rec.outcome = detail::outcome_of(rec.hp_scc_a, rec.hp_scc_ab);
  rec.freq_condition = frequency_condition(sequence, topic_a);

  for (const double factor : {0.5, 2.0}) {
    const GroupingTolerance t2{tol.eps * factor};
    const Outcome alt = detail::outcome_of(predict_next(sequence, w_a, v, t2).top_set,
                                           predict_next(sequence, w_ab, v, t2).top_set);
    if (alt != rec.outcome) {
      rec.stable = false;
      break;
    }
  }
  return rec;
}

// Order-consistency score of w_test's attention along w_ref's descending
// order: 1 per non-increasing step, exp(w) for a step that rises by |w|.
inline double priority_similarity(std::span<const int> sequence, const AttnWeights& w_ref,
                                  const AttnWeights& w_test, const Vocabulary& v) {
  if (sequence.size() < 2) throw std::invalid_argument("priority_similarity: need length >= 2");
  const Eigen::VectorXd ref = forward(sequence, w_ref, v).attention;
  const Eigen::VectorXd test = forward(sequence, w_test, v).attention;
  const int n = static_cast<int>(sequence.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return ref(a) > ref(b); });
  double total = 0.0;
  for (int j = 0; j + 1 < n; ++j) {
    const double w = test(order[j]) - test(order[j + 1]);
    total += w >= 0.0 ? 1.0 : std::exp(w);
  }
  return total / (n - 1);
}

// No strict attention reversal beyond tolerance: whenever the base model
// separates two positions by more than eps, the mixed model must not order
// them strictly the other way by more than eps.
inline bool priority_order_preserved(std::span<const int> sequence, const AttnWeights& w_a,
                                     const AttnWeights& w_ab, const Vocabulary& v,
                                     GroupingTolerance tol = {}) {
  const Eigen::VectorXd a = forward(sequence, w_a, v).attention;
  const Eigen::VectorXd b = forward(sequence, w_ab, v).attention;
  const int n = static_cast<int>(sequence.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i) > a(j) + tol.eps && b(i) < b(j) - tol.eps) return false;
  return true;
}

struct McEstimate {
  int top_size = 0;        // l: number of tokens sharing the top probability
  double estimate = 0.0;   // P(some outside token outnumbers all top tokens)
  double std_error = 0.0;
  double diff_from_prev = 0.0;      // estimate(l) - estimate(previous l)
  double diff_std_error = 0.0;      // paired standard error of that difference
};

// Monte Carlo for the token-frequency condition over iid sequences: the top l
// tokens carry probability p each, the remaining mass is uniform. Common
// random numbers couple the sequences across l via a shared inverse-CDF grid,
// so consecutive differences can be tested without independent-noise blowup.
inline std::vector<McEstimate> coupled_frequency_mc(double top_prob, int num_tokens,
                                                    std::span<const int> top_sizes, int seq_len,
                                                    int trials, std::uint64_t seed) {
  if (num_tokens < 1 || seq_len < 1 || trials < 1)
    throw std::invalid_argument("coupled_frequency_mc: bad sizes");
  if (!(top_prob > 0.0) || top_prob * num_tokens < 1.0 - 1e-12)
    throw std::invalid_argument("coupled_frequency_mc: degenerate distribution");
  for (int l : top_sizes) {
    if (l < 1 || l > num_tokens) throw std::invalid_argument("coupled_frequency_mc: bad l");
    if (top_prob * l > 1.0 + 1e-12)
      throw std::invalid_argument("coupled_frequency_mc: top probabilities exceed 1");
  }

  Rng rng(seed);
  std::vector<std::vector<std::uint8_t>> hits(top_sizes.size(),
                                              std::vector<std::uint8_t>(trials, 0));
  std::vector<double> u(seq_len);
  std::vector<int> counts(num_tokens);
  for (int trial = 0; trial < trials; ++trial) {
    for (int i = 0; i < seq_len; ++i) u[i] = rng.next_double();
    for (std::size_t li = 0; li < top_sizes.size(); ++li) {
      const int l = top_sizes[li];
      const double outside = l < num_tokens
                                 ? (1.0 - top_prob * l) / static_cast<double>(num_tokens - l)
                                 : 0.0;
      std::fill(counts.begin(), counts.end(), 0);
      for (int i = 0; i < seq_len; ++i) {
        const double x = u[i];
        int tok;
        if (x < top_prob * l) {
          tok = std::min(l - 1, static_cast<int>(x / top_prob));
        } else if (outside > 0.0) {
          tok = l + std::min(num_tokens - l - 1,
                             static_cast<int>((x - top_prob * l) / outside));
        } else {
          tok = l - 1;
        }
        ++counts[tok];
      }
      int top_max = 0;
      for (int t = 0; t < l; ++t) top_max = std::max(top_max, counts[t]);
      bool outnumbered = false;
      for (int t = l; t < num_tokens; ++t)
        if (counts[t] > top_max) {
          outnumbered = true;
          break;
        }
      hits[li][trial] = outnumbered ? 1 : 0;
    }
  }

  std::vector<McEstimate> out(top_sizes.size());
  for (std::size_t li = 0; li < top_sizes.size(); ++li) {
    double mean = 0.0;
    for (int t = 0; t < trials; ++t) mean += hits[li][t];
    mean /= trials;
    out[li].top_size = top_sizes[li];
    out[li].estimate = mean;
    out[li].std_error = std::sqrt(std::max(0.0, mean * (1.0 - mean) / trials));
    if (li > 0) {
      double dmean = 0.0;
      for (int t = 0; t < trials; ++t)
        dmean += static_cast<double>(hits[li][t]) - static_cast<double>(hits[li - 1][t]);
      dmean /= trials;
      double var = 0.0;
      for (int t = 0; t < trials; ++t) {
        const double d = static_cast<double>(hits[li][t]) - static_cast<double>(hits[li - 1][t]);
        var += (d - dmean) * (d - dmean);
      }
      var /= std::max(1, trials - 1);
      out[li].diff_from_prev = dmean;
      out[li].diff_std_error = std::sqrt(var / trials);
    }
  }
  return out;
}

}  // namespace topicshift
