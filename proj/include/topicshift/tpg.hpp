#pragma once

#include <algorithm>
#include <climits>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "topicshift/rng.hpp"

namespace topicshift {

using Edge = std::pair<int, int>;  // source -> destination

// Priority graph conditioned on one last token. Immutable after construction.
struct Tpg {
  int root = 0;
  std::set<int> nodes;
  std::set<Edge> edges;

  bool valid() const {
    if (!nodes.count(root)) return false;
    for (const auto& [a, b] : edges)
      if (!nodes.count(a) || !nodes.count(b)) return false;
    return true;
  }

  std::vector<int> out_neighbors(int node) const {
    std::vector<int> out;
    for (auto it = edges.lower_bound({node, INT_MIN}); it != edges.end() && it->first == node; ++it)
      out.push_back(it->second);
    return out;
  }

  int out_degree(int node) const {
    int deg = 0;
    for (auto it = edges.lower_bound({node, INT_MIN}); it != edges.end() && it->first == node; ++it)
      ++deg;
    return deg;
  }

  bool operator==(const Tpg& o) const {
    return root == o.root && nodes == o.nodes && edges == o.edges;
  }
};

// Strongly connected components plus the acyclic condensation.
struct SccInfo {
  std::map<int, int> component_of;              // node -> component id
  std::vector<std::vector<int>> components;     // sorted members
  std::set<std::pair<int, int>> condensation_edges;
  std::vector<int> topo_order;                  // component ids, sources first
  std::vector<std::vector<bool>> comp_reach;    // comp_reach[c][c'] : path c -> c'
};

// Iterative Tarjan. Self-loops are ignored for connectivity (a singleton with
// a self-loop is still a singleton component).
inline SccInfo tarjan_scc(const Tpg& g) {
  if (!g.valid()) throw std::invalid_argument("tarjan_scc: invalid graph");
  const std::vector<int> order(g.nodes.begin(), g.nodes.end());
  std::map<int, int> idx_of;
  for (std::size_t i = 0; i < order.size(); ++i) idx_of[order[i]] = static_cast<int>(i);
  const int n = static_cast<int>(order.size());

  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : g.edges)
    if (a != b) adj[idx_of[a]].push_back(idx_of[b]);

  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int counter = 0;

  struct Frame {
    int v;
    std::size_t edge;
  };
  for (int start = 0; start < n; ++start) {
    if (index[start] >= 0) continue;
    std::vector<Frame> work{{start, 0}};
    while (!work.empty()) {
      auto& [v, ei] = work.back();
      if (ei == 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (ei < adj[v].size()) {
        const int w = adj[v][ei++];
        if (index[w] < 0) {
          work.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<int> members;
        while (true) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = static_cast<int>(comps.size());
          members.push_back(order[w]);
          if (w == v) break;
        }
        std::sort(members.begin(), members.end());
        comps.push_back(std::move(members));
      }
      const int done = v;
      work.pop_back();
      if (!work.empty()) low[work.back().v] = std::min(low[work.back().v], low[done]);
    }
  }

  SccInfo info;
  info.components = std::move(comps);
  for (int i = 0; i < n; ++i) info.component_of[order[i]] = comp[i];
  const int m = static_cast<int>(info.components.size());
  for (const auto& [a, b] : g.edges) {
    const int ca = comp[idx_of[a]], cb = comp[idx_of[b]];
    if (ca != cb) info.condensation_edges.insert({ca, cb});
  }
  // Tarjan emits components in reverse topological order.
  info.topo_order.resize(m);
  for (int i = 0; i < m; ++i) info.topo_order[i] = m - 1 - i;
  // Condensation reachability (components are few; dense propagation is fine).
  info.comp_reach.assign(m, std::vector<bool>(m, false));
  for (int i = 0; i < m; ++i) info.comp_reach[i][i] = true;
  for (auto it = info.topo_order.rbegin(); it != info.topo_order.rend(); ++it) {
    const int c = *it;
    for (const auto& [a, b] : info.condensation_edges)
      if (a == c)
        for (int j = 0; j < m; ++j)
          if (info.comp_reach[b][j]) info.comp_reach[c][j] = true;
  }
  return info;
}

enum class Relation { kDominates, kDominated, kSameScc, kIncomparable };

inline Relation relation_from_scc(const SccInfo& scc, int i, int j) {
  const auto ci = scc.component_of.find(i), cj = scc.component_of.find(j);
  if (ci == scc.component_of.end() || cj == scc.component_of.end())
    throw std::invalid_argument("relation: node not in graph");
  if (ci->second == cj->second) return Relation::kSameScc;
  const bool ij = scc.comp_reach[ci->second][cj->second];
  const bool ji = scc.comp_reach[cj->second][ci->second];
  if (ij) return Relation::kDominates;
  if (ji) return Relation::kDominated;
  return Relation::kIncomparable;
}

inline Relation relation(const Tpg& g, int i, int j) {
  if (i == j) throw std::invalid_argument("relation: tokens must be distinct");
  if (!g.nodes.count(i) || !g.nodes.count(j))
    throw std::invalid_argument("relation: node not in graph");
  return relation_from_scc(tarjan_scc(g), i, j);
}

// Full family of priority graphs, one per conditioning token.
struct Topic {
  int token_count = 0;
  std::vector<Tpg> graphs;  // graphs[k].root == k

  bool valid() const {
    if (static_cast<int>(graphs.size()) != token_count) return false;
    for (int k = 0; k < token_count; ++k)
      if (graphs[k].root != k || !graphs[k].valid()) return false;
    return true;
  }
  bool operator==(const Topic& o) const {
    return token_count == o.token_count && graphs == o.graphs;
  }
};

inline Topic union_topics(const Topic& a, const Topic& b) {
  if (a.token_count != b.token_count)
    throw std::invalid_argument("union_topics: vocabulary sizes differ");
  Topic out;
  out.token_count = a.token_count;
  out.graphs.resize(a.token_count);
  for (int k = 0; k < a.token_count; ++k) {
    Tpg& g = out.graphs[k];
    g.root = k;
    g.nodes = a.graphs[k].nodes;
    g.nodes.insert(b.graphs[k].nodes.begin(), b.graphs[k].nodes.end());
    g.edges = a.graphs[k].edges;
    g.edges.insert(b.graphs[k].edges.begin(), b.graphs[k].edges.end());
  }
  return out;
}

// Tokens of the sequence that dominate-or-tie every other token of the
// sequence. Errors if some pair of sequence tokens is incomparable.
inline std::set<int> highest_priority_scc(const Tpg& g, std::span<const int> sequence) {
  std::set<int> distinct(sequence.begin(), sequence.end());
  for (int t : distinct)
    if (!g.nodes.count(t))
      throw std::invalid_argument("highest_priority_scc: sequence token not in graph");
  const SccInfo scc = tarjan_scc(g);
  std::set<int> top;
  for (int i : distinct) {
    bool best = true;
    for (int j : distinct) {
      if (i == j) continue;
      switch (relation_from_scc(scc, i, j)) {
        case Relation::kDominates:
        case Relation::kSameScc:
          break;
        case Relation::kDominated:
          best = false;
          break;
        case Relation::kIncomparable:
          throw std::domain_error("highest_priority_scc: incomparable token pair");
      }
    }
    if (best) top.insert(i);
  }
  return top;
}

inline bool totally_comparable(const Tpg& g) {
  const SccInfo scc = tarjan_scc(g);
  const std::vector<int> order(g.nodes.begin(), g.nodes.end());
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size(); ++b)
      if (relation_from_scc(scc, order[a], order[b]) == Relation::kIncomparable) return false;
  return true;
}

// Random priority graph for one root: L draws (with replacement) from the
// ordered edges incident to the root, root edges to every covered token, then
// closure to the data-generation fixed point so that a dataset drawn from the
// graph reconstructs it exactly. Retries until all node pairs are comparable.
inline Tpg random_tpg(int token_count, int root, int edges_per_graph, Rng& rng,
                      int max_attempts = 2000) {
  if (token_count < 2) throw std::invalid_argument("random_tpg: need at least two tokens");
  const int capacity = 2 * (token_count - 1);
  if (edges_per_graph < 1 || edges_per_graph > capacity)
    throw std::invalid_argument("random_tpg: edge budget exceeds distinct incident edges");

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::set<Edge> chosen;
    for (int i = 0; i < edges_per_graph; ++i) {
      int other = rng.next_below(token_count - 1);
      if (other >= root) ++other;
      chosen.insert(rng.next_below(2) == 0 ? Edge{root, other} : Edge{other, root});
    }
    std::set<int> nodes{root};
    std::set<int> lifted;  // tokens with a selected edge into the root
    for (const auto& [a, b] : chosen) {
      nodes.insert(a);
      nodes.insert(b);
      if (b == root) lifted.insert(a);
    }
    // Comparability needs at most one token outside the root's component:
    // dominated tokens have no out-edges and are mutually incomparable.
    int dominated = 0;
    for (int x : nodes)
      if (x != root && !lifted.count(x)) ++dominated;
    if (dominated > 1) continue;

    Tpg g;
    g.root = root;
    g.nodes = nodes;
    lifted.insert(root);
    for (int y : lifted)
      for (int x : nodes) g.edges.insert({y, x});
    return g;
  }
  throw std::runtime_error("random_tpg: comparability retries exhausted");
}

inline Topic random_topic(int token_count, int edges_per_graph, std::uint64_t seed) {
  Topic topic;
  topic.token_count = token_count;
  topic.graphs.reserve(token_count);
  for (int k = 0; k < token_count; ++k) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(k)));
    topic.graphs.push_back(random_tpg(token_count, k, edges_per_graph, rng));
  }
  return topic;
}

// Text format: one line per graph, "k: i->j, i->j, ...". Round-trips exactly.
inline std::string topic_to_text(const Topic& t) {
  std::ostringstream out;
  for (int k = 0; k < t.token_count; ++k) {
    out << k << ':';
    bool first = true;
    for (const auto& [a, b] : t.graphs[k].edges) {
      out << (first ? " " : ", ") << a << "->" << b;
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

inline Topic topic_from_text(const std::string& text) {
  Topic t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw std::runtime_error("topic_from_text: missing ':'");
    Tpg g;
    g.root = std::stoi(line.substr(0, colon));
    g.nodes.insert(g.root);
    std::string rest = line.substr(colon + 1);
    std::istringstream edges(rest);
    std::string item;
    while (std::getline(edges, item, ',')) {
      const auto arrow = item.find("->");
      if (arrow == std::string::npos) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        throw std::runtime_error("topic_from_text: bad edge '" + item + "'");
      }
      const int a = std::stoi(item.substr(0, arrow));
      const int b = std::stoi(item.substr(arrow + 2));
      g.nodes.insert(a);
      g.nodes.insert(b);
      g.edges.insert({a, b});
    }
    t.graphs.push_back(std::move(g));
  }
  t.token_count = static_cast<int>(t.graphs.size());
  for (int k = 0; k < t.token_count; ++k)
    if (t.graphs[k].root != k) throw std::runtime_error("topic_from_text: roots out of order");
  return t;
}

inline void save_topic(const Topic& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_topic: cannot open " + path);
  out << topic_to_text(t);
}

inline Topic load_topic(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_topic: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return topic_from_text(buf.str());
}

}  // namespace topicshift
