#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "topicshift/tpg.hpp"
#include "topicshift/vocab.hpp"

namespace topicshift {

struct ConstraintTriple {
  int i = 0, j = 0, k = 0;  // (e_i - e_j)^T W e_k
  bool operator==(const ConstraintTriple& o) const { return i == o.i && j == o.j && k == o.k; }
};

struct SvmConstraintSet {
  std::vector<ConstraintTriple> equalities;    // same-component pairs, = 0
  std::vector<ConstraintTriple> inequalities;  // strict-priority pairs, >= 1
};

enum class Comparability { kStrict, kPermissive };

// One equality per unordered same-component pair, one inequality per ordered
// dominates pair, for every conditioning token. Strict mode rejects graphs
// with incomparable pairs; permissive mode (mixed-topic unions) emits
// constraints only for the pairs that carry a relation.
inline SvmConstraintSet build_constraints(const Topic& topic, const Vocabulary& v,
                                          Comparability mode = Comparability::kStrict) {
  if (topic.token_count > v.token_count())
    throw std::invalid_argument("build_constraints: topic exceeds vocabulary");
  SvmConstraintSet cs;
  for (int k = 0; k < topic.token_count; ++k) {
    const Tpg& g = topic.graphs[k];
    const SccInfo scc = tarjan_scc(g);
    const std::vector<int> order(g.nodes.begin(), g.nodes.end());
    for (std::size_t a = 0; a < order.size(); ++a) {
      for (std::size_t b = a + 1; b < order.size(); ++b) {
        const int i = order[a], j = order[b];
        switch (relation_from_scc(scc, i, j)) {
          case Relation::kSameScc:
            cs.equalities.push_back({i, j, k});
            break;
          case Relation::kDominates:
            cs.inequalities.push_back({i, j, k});
            break;
          case Relation::kDominated:
            cs.inequalities.push_back({j, i, k});
            break;
          case Relation::kIncomparable:
            if (mode == Comparability::kStrict)
              throw std::domain_error("build_constraints: incomparable token pair");
            break;
        }
      }
    }
  }
  return cs;
}

struct SvmSolution {
  bool zero = false;  // structurally zero: no strict-priority pairs exist
  Eigen::MatrixXd weights;
  double equality_residual = 0.0;     // max |equality value|
  double inequality_shortfall = 0.0;  // max(0, 1 - min inequality value)
  double stationarity_residual = 0.0;  // relative KKT defect

  Eigen::MatrixXd normalized() const {
    if (zero) throw std::domain_error("SvmSolution: zero solution has no direction");
    return weights / weights.norm();
  }
};

namespace detail {

// Flattened constraint row r with <r, vec(W)> = (e_i - e_j)^T W e_k.
inline Eigen::VectorXd constraint_row(const ConstraintTriple& c, const Vocabulary& v) {
  const int d = v.dim();
  const Eigen::VectorXd diff =
      (v.embeddings.row(c.i) - v.embeddings.row(c.j)).transpose();
  const Eigen::VectorXd key = v.embeddings.row(c.k).transpose();
  Eigen::VectorXd row(d * d);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) row(p * d + q) = diff(p) * key(q);
  return row;
}

}  // namespace detail

// Minimum-Frobenius-norm W with equality pairs at 0 and strict pairs at >= 1.
// Squared-hinge penalty descent (Barzilai-Borwein steps) localizes the active
// set; an exact minimum-norm solve on the active rows polishes the solution,
// growing the set while any inequality stays violated.
inline SvmSolution solve_graph_svm(const SvmConstraintSet& cs, const Vocabulary& v,
                                   double tol = 1e-8) {
  SvmSolution sol;
  if (cs.inequalities.empty()) {
    sol.zero = true;
    sol.weights = Eigen::MatrixXd::Zero(v.dim(), v.dim());
    return sol;
  }
  const int d = v.dim();
  const int n = d * d;
  const int ne = static_cast<int>(cs.equalities.size());
  const int ni = static_cast<int>(cs.inequalities.size());

  Eigen::MatrixXd a_eq(ne, n), a_in(ni, n);
  for (int r = 0; r < ne; ++r) a_eq.row(r) = detail::constraint_row(cs.equalities[r], v);
  for (int r = 0; r < ni; ++r) a_in.row(r) = detail::constraint_row(cs.inequalities[r], v);

  // Phase 1: min 1/2|w|^2 + mu(|Aeq w|^2 + |max(0, 1 - Ain w)|^2).
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n), grad_prev(n), w_prev(n);
  for (const double mu : {10.0, 1e3, 1e5}) {
    double step = 1e-3 / mu;
    for (int it = 0; it < 400; ++it) {
      const Eigen::VectorXd eq_val = a_eq * w;
      const Eigen::VectorXd in_val = a_in * w;
      const Eigen::VectorXd hinge = (1.0 - in_val.array()).cwiseMax(0.0).matrix();
      grad = w + 2.0 * mu * (a_eq.transpose() * eq_val) - 2.0 * mu * (a_in.transpose() * hinge);
      if (it > 0) {
        const Eigen::VectorXd dw = w - w_prev;
        const Eigen::VectorXd dg = grad - grad_prev;
        const double denom = dg.squaredNorm();
        if (denom > 0.0) step = std::clamp(std::abs(dw.dot(dg)) / denom, 1e-12, 1e3);
      }
      w_prev = w;
      grad_prev = grad;
      w -= step * grad;
    }
  }

  // Phase 2: exact minimum-norm solve on the active rows.
  std::vector<bool> active(ni, false);
  {
    const Eigen::VectorXd in_val = a_in * w;
    for (int r = 0; r < ni; ++r) active[r] = in_val(r) <= 1.0 + 1e-3;
    if (std::none_of(active.begin(), active.end(), [](bool b) { return b; }))
      active[static_cast<int>(std::min_element(in_val.data(), in_val.data() + ni) -
                              in_val.data())] = true;
  }
  const int max_rounds = 200;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<int> act;
    for (int r = 0; r < ni; ++r)
      if (active[r]) act.push_back(r);
    Eigen::MatrixXd a_sys(ne + act.size(), n);
    Eigen::VectorXd b_sys(ne + act.size());
    for (int r = 0; r < ne; ++r) {
      a_sys.row(r) = a_eq.row(r);
      b_sys(r) = 0.0;
    }
    for (std::size_t r = 0; r < act.size(); ++r) {
      a_sys.row(ne + static_cast<int>(r)) = a_in.row(act[r]);
      b_sys(ne + static_cast<int>(r)) = 1.0;
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a_sys);
    const Eigen::VectorXd w_new = cod.solve(b_sys);
    if ((a_sys * w_new - b_sys).cwiseAbs().maxCoeff() > 1e-6)
      throw std::runtime_error("solve_graph_svm: inconsistent active system");
    w = w_new;

    const Eigen::VectorXd in_val = a_in * w;
    int worst = -1;
    double worst_val = 1.0 - 1e-9;
    for (int r = 0; r < ni; ++r) {
      if (!active[r] && in_val(r) < worst_val) {
        worst_val = in_val(r);
        worst = r;
      }
    }
    if (worst >= 0) {
      active[worst] = true;
      continue;
    }
    // Multipliers: w must be a combination of active rows with non-negative
    // inequality coefficients. Drop the most negative one, if any.
    Eigen::VectorXd theta = cod.pseudoInverse().transpose() * w;
    int drop = -1;
    double most_neg = -1e-6;
    for (std::size_t r = 0; r < act.size(); ++r) {
      const double m = theta(ne + static_cast<int>(r));
      if (m < most_neg) {
        most_neg = m;
        drop = act[r];
      }
    }
    if (drop >= 0 && round + 1 < max_rounds) {
      active[drop] = false;
      continue;
    }
    break;
  }

  sol.weights.resize(d, d);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) sol.weights(p, q) = w(p * d + q);

  const Eigen::VectorXd eq_val = a_eq * w;
  const Eigen::VectorXd in_val = a_in * w;
  sol.equality_residual = ne > 0 ? eq_val.cwiseAbs().maxCoeff() : 0.0;
  sol.inequality_shortfall = std::max(0.0, 1.0 - in_val.minCoeff());

  // Stationarity: distance of w from the cone of constraint rows (free
  // equality multipliers, non-negative multipliers on active inequalities),
  // via projected gradient on the multipliers.
  {
    std::vector<int> act;
    for (int r = 0; r < ni; ++r)
      if (in_val(r) <= 1.0 + 1e-6) act.push_back(r);
    Eigen::MatrixXd a_sys(ne + act.size(), n);
    for (int r = 0; r < ne; ++r) a_sys.row(r) = a_eq.row(r);
    for (std::size_t r = 0; r < act.size(); ++r)
      a_sys.row(ne + static_cast<int>(r)) = a_in.row(act[r]);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(a_sys.rows());
    const Eigen::MatrixXd gram = a_sys * a_sys.transpose();
    const double lip = std::max(1e-12, gram.trace());
    for (int it = 0; it < 500; ++it) {
      Eigen::VectorXd g = gram * theta - a_sys * w;
      theta -= g / lip;
      for (std::size_t r = 0; r < act.size(); ++r) {
        auto& m = theta(ne + static_cast<int>(r));
        if (m < 0.0) m = 0.0;
      }
    }
    const double wnorm = std::max(w.norm(), 1e-12);
    sol.stationarity_residual = (w - a_sys.transpose() * theta).norm() / wnorm;
  }
  (void)tol;
  return sol;
}

// Cosine of the angle between a weight matrix and the max-margin solution.
inline double direction_correlation(const Eigen::MatrixXd& w, const SvmSolution& sol) {
  if (sol.zero) throw std::domain_error("direction_correlation: zero max-margin solution");
  const double wn = w.norm();
  const double sn = sol.weights.norm();
  if (wn <= 0.0 || sn <= 0.0)
    throw std::domain_error("direction_correlation: zero matrix has no direction");
  return (w.array() * sol.weights.array()).sum() / (wn * sn);
}

}  // namespace topicshift
