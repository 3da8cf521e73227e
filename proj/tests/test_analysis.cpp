#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "topicshift/analysis.hpp"
#include "topicshift/graphsvm.hpp"

using namespace topicshift;

namespace {

// Weights realizing chosen per-token attention scores against a fixed last
// token (log targets in the token-score table).
AttnWeights weights_for_attention(const Vocabulary& v, int last,
                                  const std::vector<std::pair<int, double>>& targets) {
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(v.token_count(), v.token_count());
  for (const auto& [token, value] : targets) table(token, last) = std::log(value);
  return v.embeddings.transpose() * table * v.embeddings;
}

struct Scenario {
  std::vector<int> seq;
  AttnWeights w_a, w_ab;
};

// The three worked classification scenarios against the chain fixture: clear
// continuity, an exact mixed-model tie, and a count-driven flip.
Scenario continuity_scenario(const Vocabulary& v) {
  return {{4, 0, 2, 3},
          weights_for_attention(v, 3, {{4, 0.45}, {0, 0.25}, {2, 0.20}, {3, 0.10}}),
          weights_for_attention(v, 3, {{4, 0.40}, {0, 0.30}, {2, 0.15}, {3, 0.15}})};
}
Scenario ambiguity_scenario(const Vocabulary& v) {
  return {{0, 3, 0, 3},
          weights_for_attention(v, 3, {{0, 0.30}, {3, 0.20}}),
          weights_for_attention(v, 3, {{0, 0.25}, {3, 0.25}})};
}
Scenario change_scenario(const Vocabulary& v) {
  return {{4, 3, 3, 3},
          weights_for_attention(v, 3, {{4, 0.70}, {3, 0.10}}),
          weights_for_attention(v, 3, {{4, 0.40}, {3, 0.20}})};
}

}  // namespace

TEST_CASE("prediction reports the maximal-score set with its representative") {
  const Vocabulary v = build_orthonormal_vocab(5, 8, 1);
  const Scenario s = continuity_scenario(v);
  const Prediction p = predict_next(s.seq, s.w_ab, v);
  CHECK(p.token == 4);
  CHECK(p.top_set == std::set<int>{4});

  const Scenario amb = ambiguity_scenario(v);
  const Prediction q = predict_next(amb.seq, amb.w_ab, v);
  CHECK(q.top_set == std::set<int>{0, 3});
  CHECK(q.token == 0);  // lowest id of the tied set

  const std::vector<int> mono{2, 2};
  const Prediction r = predict_next(mono, AttnWeights::Zero(8, 8), v);
  CHECK(r.top_set == std::set<int>{2});
  CHECK(r.token == 2);
}

TEST_CASE("the three worked scenarios classify as keep, ambiguous, change") {
  const Vocabulary v = build_orthonormal_vocab(5, 8, 1);
  const Topic topic_a = fixtures::chain_topic_a();

  const Scenario keep = continuity_scenario(v);
  const OutcomeRecord r1 = classify_outcome(keep.seq, keep.w_a, keep.w_ab, topic_a, v);
  CHECK(r1.outcome == Outcome::kKeepTopic);
  CHECK(r1.hp_scc_a == std::set<int>{4});
  CHECK(r1.hp_scc_ab == std::set<int>{4});
  CHECK(r1.priority_scc_a == std::set<int>{4});
  CHECK(!r1.freq_condition);

  const Scenario amb = ambiguity_scenario(v);
  const OutcomeRecord r2 = classify_outcome(amb.seq, amb.w_a, amb.w_ab, topic_a, v);
  CHECK(r2.outcome == Outcome::kAmbiguous);
  CHECK(r2.hp_scc_a == std::set<int>{0});
  CHECK(r2.hp_scc_ab == std::set<int>{0, 3});

  const Scenario chg = change_scenario(v);
  const OutcomeRecord r3 = classify_outcome(chg.seq, chg.w_a, chg.w_ab, topic_a, v);
  CHECK(r3.outcome == Outcome::kChangeTopic);
  CHECK(r3.hp_scc_a == std::set<int>{4});
  CHECK(r3.hp_scc_ab == std::set<int>{3});
  CHECK(r3.freq_condition);

  // counts bookkeeping
  CHECK(r3.counts.at(3) == 3);
  CHECK(r3.counts.at(4) == 1);

  // membership precondition
  Topic tiny = topic_a;
  tiny.graphs[3].nodes.erase(4);
  tiny.graphs[3].edges = {{0, 0}};
  CHECK_THROWS_AS(classify_outcome(keep.seq, keep.w_a, keep.w_ab, tiny, v), std::domain_error);
}

TEST_CASE("frequency condition needs an outside token strictly outnumbering the top") {
  const Topic topic_a = fixtures::chain_topic_a();
  const std::vector<int> flip{4, 3, 3, 3};
  CHECK(frequency_condition(flip, topic_a));
  const std::vector<int> flat{4, 0, 2, 3};
  CHECK(!frequency_condition(flat, topic_a));
  const std::vector<int> inside_only{4, 4, 4};  // nothing outside the top set
  Topic t4 = topic_a;
  CHECK(!frequency_condition(inside_only, t4));
}

TEST_CASE("priority similarity evaluates the order-consistency formula") {
  const Vocabulary v = build_orthonormal_vocab(4, 6, 2);
  const std::vector<int> seq{0, 1, 2};
  const AttnWeights w_ref =
      weights_for_attention(v, 2, {{0, 0.50}, {1, 0.30}, {2, 0.20}});
  // differences along the reference order: +0.2 then -0.1
  const double b = (1.0 - 0.3) / 3.0;
  const AttnWeights w_test =
      weights_for_attention(v, 2, {{0, b + 0.2}, {1, b}, {2, b + 0.1}});

  CHECK(priority_similarity(seq, w_ref, w_ref, v) == doctest::Approx(1.0).epsilon(1e-12));
  const double want = (1.0 + std::exp(-0.1)) / 2.0;
  CHECK(priority_similarity(seq, w_ref, w_test, v) == doctest::Approx(want).epsilon(1e-9));
  CHECK(want == doctest::Approx(0.95242).epsilon(1e-4));

  const std::vector<int> one{2};
  CHECK_THROWS_AS(priority_similarity(one, w_ref, w_test, v), std::invalid_argument);
}

TEST_CASE("order preservation flags strict reversals only") {
  const Vocabulary v = build_orthonormal_vocab(4, 6, 3);
  const std::vector<int> seq{0, 1, 2};
  const AttnWeights w1 = weights_for_attention(v, 2, {{0, 0.5}, {1, 0.3}, {2, 0.2}});
  const AttnWeights w2 = weights_for_attention(v, 2, {{0, 0.4}, {1, 0.35}, {2, 0.25}});
  const AttnWeights w3 = weights_for_attention(v, 2, {{0, 0.3}, {1, 0.5}, {2, 0.2}});
  CHECK(priority_order_preserved(seq, w1, w2, v));
  CHECK(!priority_order_preserved(seq, w1, w3, v));
  // collapsing a strict order to a tie is allowed
  const AttnWeights w4 = weights_for_attention(v, 2, {{0, 0.4}, {1, 0.4}, {2, 0.2}});
  CHECK(priority_order_preserved(seq, w1, w4, v));
}

TEST_CASE("attention differences mirror the graph relations at the certified limit") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Topic t = random_topic(8, 4, seed);
    const Vocabulary v = build_orthonormal_vocab(8, 12, seed);
    const SvmConstraintSet cs = build_constraints(t, v);
    if (cs.inequalities.empty()) continue;
    const AttnWeights dir = solve_graph_svm(cs, v).normalized();
    Rng rng(seed);
    for (int iter = 0; iter < 20; ++iter) {
      const std::vector<int> seq = generate_test_sequence(t, 6, rng);
      const Eigen::VectorXd attn = forward(seq, dir, v).attention;
      const Tpg& g = t.graphs[seq.back()];
      const SccInfo scc = tarjan_scc(g);
      for (std::size_t a = 0; a < seq.size(); ++a)
        for (std::size_t b = 0; b < seq.size(); ++b) {
          if (seq[a] == seq[b]) {
            CHECK(std::abs(attn(a) - attn(b)) < 1e-9);
            continue;
          }
          const Relation rel = relation_from_scc(scc, seq[a], seq[b]);
          if (rel == Relation::kSameScc) CHECK(std::abs(attn(a) - attn(b)) < 5e-4);
          if (rel == Relation::kDominates) CHECK(attn(a) > attn(b) + 5e-4);
          if (rel == Relation::kDominated) CHECK(attn(b) > attn(a) + 5e-4);
        }
    }
  }
}

TEST_CASE("classification stability is recorded against halved and doubled eps") {
  const Vocabulary v = build_orthonormal_vocab(5, 8, 1);
  const Topic topic_a = fixtures::chain_topic_a();
  const Scenario keep = continuity_scenario(v);
  const OutcomeRecord r = classify_outcome(keep.seq, keep.w_a, keep.w_ab, topic_a, v);
  CHECK(r.stable);  // margins are far from every grouping threshold
}

TEST_CASE("outnumbering probability: impossible when every token is top") {
  const std::vector<int> sizes{4};
  const auto est = coupled_frequency_mc(0.25, 4, sizes, 16, 2000, 9);
  CHECK(est[0].estimate == 0.0);
}

TEST_CASE("dominant top token makes outnumbering vanish at long lengths") {
  const std::vector<int> sizes{1};
  const auto est = coupled_frequency_mc(0.4, 4, sizes, 512, 10000, 10);
  CHECK(est[0].estimate < 0.01);
}

TEST_CASE("outnumbering probability is non-increasing in the top-set size") {
  const std::vector<int> sizes{1, 2, 3, 4, 5};
  const auto est = coupled_frequency_mc(0.15, 10, sizes, 20, 20000, 11);
  for (std::size_t i = 1; i < est.size(); ++i)
    CHECK(est[i].diff_from_prev <= 2.0 * est[i].diff_std_error + 1e-12);
  CHECK(est.front().estimate > est.back().estimate);
}

TEST_CASE("degenerate sampling distributions are rejected") {
  const std::vector<int> sizes{1};
  CHECK_THROWS_AS(coupled_frequency_mc(0.0, 4, sizes, 8, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(coupled_frequency_mc(0.05, 4, sizes, 8, 10, 1), std::invalid_argument);
  const std::vector<int> huge{9};
  CHECK_THROWS_AS(coupled_frequency_mc(0.2, 4, huge, 8, 10, 1), std::invalid_argument);
}
