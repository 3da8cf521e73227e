#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "topicshift/graphsvm.hpp"
#include "topicshift/vocab.hpp"

using namespace topicshift;

namespace {

// Independent oracle for orthonormal vocabularies whose graphs condense to a
// total order: per conditioning token the scores take one value per level,
// consecutive levels exactly one apart, shifted to zero weighted mean; the
// matrix is E^T V E. Derived by per-column separation of the quadratic
// program plus the active-chain argument.
Eigen::MatrixXd chain_solution(const Topic& topic, const Vocabulary& v) {
  const int K = v.token_count();
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(K, K);
  for (int k = 0; k < topic.token_count; ++k) {
    const Tpg& g = topic.graphs[k];
    const SccInfo scc = tarjan_scc(g);
    const int m = static_cast<int>(scc.components.size());
    if (m == 1) continue;
    // level of each component = position in the total order
    std::vector<int> level(m);
    for (int i = 0; i < m; ++i) level[scc.topo_order[i]] = i;
    double weighted = 0.0, total = 0.0;
    for (int c = 0; c < m; ++c) {
      weighted += double(level[c]) * double(scc.components[c].size());
      total += double(scc.components[c].size());
    }
    const double shift = weighted / total;
    for (int c = 0; c < m; ++c)
      for (int node : scc.components[c]) table(node, k) = shift - double(level[c]);
  }
  return v.embeddings.transpose() * table * v.embeddings;
}

long comparable_pair_count(const Topic& t) {
  long count = 0;
  for (const auto& g : t.graphs) {
    const SccInfo scc = tarjan_scc(g);
    const std::vector<int> order(g.nodes.begin(), g.nodes.end());
    for (std::size_t a = 0; a < order.size(); ++a)
      for (std::size_t b = a + 1; b < order.size(); ++b)
        if (relation_from_scc(scc, order[a], order[b]) != Relation::kIncomparable) ++count;
  }
  return count;
}

double constraint_value(const ConstraintTriple& c, const Eigen::MatrixXd& w,
                        const Vocabulary& v) {
  return (v.embeddings.row(c.i) - v.embeddings.row(c.j)) * w *
         v.embeddings.row(c.k).transpose();
}

}  // namespace

TEST_CASE("constraint extraction covers exactly the comparable pairs") {
  const Topic a = fixtures::chain_topic_a();
  const Vocabulary v = build_orthonormal_vocab(5, 8, 1);
  const SvmConstraintSet cs = build_constraints(a, v);

  // the chain 4 > 2 > {0,1} > 3 has one tie and nine ordered pairs
  CHECK(cs.equalities.size() == 1);
  CHECK(cs.equalities[0] == ConstraintTriple{0, 1, 3});
  CHECK(cs.inequalities.size() == 9);
  auto has = [&](int i, int j, int k) {
    return std::find(cs.inequalities.begin(), cs.inequalities.end(), ConstraintTriple{i, j, k}) !=
           cs.inequalities.end();
  };
  CHECK(has(4, 2, 3));
  CHECK(has(2, 0, 3));
  CHECK(has(1, 3, 3));
  CHECK(has(4, 3, 3));

  for (std::uint64_t seed = 1; seed < 8; ++seed) {
    const Topic t = random_topic(7, 5, seed);
    const Vocabulary v7 = build_orthonormal_vocab(7, 9, seed);
    const SvmConstraintSet c7 = build_constraints(t, v7);
    CHECK(long(c7.equalities.size() + c7.inequalities.size()) == comparable_pair_count(t));
  }
}

TEST_CASE("strict mode rejects incomparable pairs, permissive skips them") {
  Topic t;
  t.token_count = 3;
  Tpg g;
  g.root = 0;
  g.nodes = {0, 1, 2};
  g.edges = {{0, 1}, {0, 2}};  // 1 and 2 are incomparable
  t.graphs = {g, fixtures::singleton_graph(1), fixtures::singleton_graph(2)};
  const Vocabulary v = build_orthonormal_vocab(3, 4, 2);
  CHECK_THROWS_AS(build_constraints(t, v, Comparability::kStrict), std::domain_error);
  const SvmConstraintSet cs = build_constraints(t, v, Comparability::kPermissive);
  CHECK(cs.inequalities.size() == 2);
  CHECK(cs.equalities.empty());
}

TEST_CASE("no strict pairs means the structural zero solution") {
  Topic t;
  t.token_count = 2;
  Tpg g0;
  g0.root = 0;
  g0.nodes = {0, 1};
  g0.edges = {{0, 1}, {1, 0}};
  Tpg g1 = g0;
  g1.root = 1;
  t.graphs = {g0, g1};
  const Vocabulary v = build_orthonormal_vocab(2, 3, 3);
  const SvmSolution sol = solve_graph_svm(build_constraints(t, v), v);
  CHECK(sol.zero);
  CHECK_THROWS_AS(sol.normalized(), std::domain_error);
}

TEST_CASE("single inequality reproduces the rank-one closed form") {
  const Vocabulary v = build_orthonormal_vocab(5, 8, 4);
  SvmConstraintSet cs;
  cs.inequalities.push_back({2, 4, 1});
  const SvmSolution sol = solve_graph_svm(cs, v);
  REQUIRE(!sol.zero);
  const Eigen::MatrixXd want = 0.5 *
                               (v.embeddings.row(2) - v.embeddings.row(4)).transpose() *
                               v.embeddings.row(1);
  CHECK((sol.weights - want).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(sol.weights.norm() == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-6));
}

TEST_CASE("solver output matches the chain oracle on random topics") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Topic t = random_topic(6, 4, seed);
    const Vocabulary v = build_orthonormal_vocab(6, 9, seed + 50);
    const SvmConstraintSet cs = build_constraints(t, v);
    if (cs.inequalities.empty()) continue;
    const SvmSolution sol = solve_graph_svm(cs, v);
    const Eigen::MatrixXd want = chain_solution(t, v);
    CHECK((sol.weights - want).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("feasibility and stationarity residuals stay within their bounds") {
  int solved = 0;
  for (std::uint64_t seed = 0; solved < 10 && seed < 40; ++seed) {
    const Topic a = random_topic(5, 4, seed * 3 + 1);
    const Topic b = random_topic(5, 4, seed * 3 + 2);
    const Vocabulary v = build_orthonormal_vocab(5, 7, seed);
    const SvmConstraintSet cs =
        build_constraints(union_topics(a, b), v, Comparability::kPermissive);
    if (cs.inequalities.empty()) continue;
    const SvmSolution sol = solve_graph_svm(cs, v);
    CHECK(sol.equality_residual <= 1e-6);
    CHECK(sol.inequality_shortfall <= 1e-6);
    CHECK(sol.stationarity_residual <= 1e-4);
    for (const auto& c : cs.equalities)
      CHECK(std::abs(constraint_value(c, sol.weights, v)) < 1e-6);
    for (const auto& c : cs.inequalities)
      CHECK(constraint_value(c, sol.weights, v) > 1.0 - 1e-6);
    ++solved;
  }
  CHECK(solved == 10);
}

TEST_CASE("solution norm is optimal against a projection-based feasible point") {
  // Independent feasibility heuristic: cyclic projections onto the violated
  // constraints from random starts always land on feasible points with norm
  // at least that of the solver's minimizer.
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Topic t = random_topic(5, 4, seed + 200);
    const Vocabulary v = build_orthonormal_vocab(5, 6, seed);
    const SvmConstraintSet cs = build_constraints(t, v);
    if (cs.inequalities.empty()) continue;
    const SvmSolution sol = solve_graph_svm(cs, v);

    Rng rng(seed);
    for (int start = 0; start < 3; ++start) {
      Eigen::MatrixXd w(6, 6);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) w(i, j) = rng.next_gaussian();
      for (int sweep = 0; sweep < 4000; ++sweep) {
        double worst = 0.0;
        for (const auto& c : cs.equalities) {
          const double val = constraint_value(c, w, v);
          worst = std::max(worst, std::abs(val));
          const Eigen::VectorXd diff =
              (v.embeddings.row(c.i) - v.embeddings.row(c.j)).transpose();
          const Eigen::VectorXd key = v.embeddings.row(c.k).transpose();
          w -= (val / (diff.squaredNorm() * key.squaredNorm())) * diff * key.transpose();
        }
        for (const auto& c : cs.inequalities) {
          const double val = constraint_value(c, w, v);
          if (val < 1.0) {
            worst = std::max(worst, 1.0 - val);
            const Eigen::VectorXd diff =
                (v.embeddings.row(c.i) - v.embeddings.row(c.j)).transpose();
            const Eigen::VectorXd key = v.embeddings.row(c.k).transpose();
            w += ((1.0 - val) / (diff.squaredNorm() * key.squaredNorm())) * diff *
                 key.transpose();
          }
        }
        if (worst < 1e-9) break;
      }
      CHECK(sol.weights.norm() <= w.norm() + 1e-6);
    }
  }
}

TEST_CASE("scaling the embeddings rescales the solution by the inverse square") {
  const Topic t = random_topic(5, 4, 321);
  Vocabulary v = build_orthonormal_vocab(5, 7, 5);
  const SvmConstraintSet cs = build_constraints(t, v);
  if (cs.inequalities.empty()) return;
  const SvmSolution base = solve_graph_svm(cs, v);

  Vocabulary scaled = v;
  scaled.embeddings *= 2.0;
  scaled.heads *= 0.5;  // keeps the heads tied: c_y . e_k unchanged
  const SvmSolution big = solve_graph_svm(cs, scaled);
  CHECK((big.weights * 4.0 - base.weights).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("direction correlation is the cosine in matrix space") {
  const Vocabulary v = build_orthonormal_vocab(4, 5, 6);
  SvmConstraintSet cs;
  cs.inequalities.push_back({0, 1, 2});
  const SvmSolution sol = solve_graph_svm(cs, v);
  CHECK(direction_correlation(sol.weights, sol) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(direction_correlation(-sol.weights, sol) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(direction_correlation(Eigen::MatrixXd::Zero(5, 5), sol), std::domain_error);
}
