#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "topicshift/rng.hpp"
#include "topicshift/tpg.hpp"

namespace topicshift {

struct SequenceSample {
  std::vector<int> tokens;
  int label = 0;

  int last() const { return tokens.back(); }
  bool contains_label() const {
    for (int t : tokens)
      if (t == label) return true;
    return false;
  }
  bool operator==(const SequenceSample& o) const {
    return tokens == o.tokens && label == o.label;
  }
};

struct Dataset {
  std::vector<SequenceSample> samples;
  int token_count = 0;
  std::string source;  // "a", "b" or "ab"

  bool operator==(const Dataset& o) const {
    return samples == o.samples && token_count == o.token_count && source == o.source;
  }
};

namespace detail {

// Label candidates weighted by out-degree; the degenerate single-node graph
// {k} with no edges yields the root itself.
inline void sample_from_graph(const Tpg& g, int seq_len, Rng& rng, SequenceSample& out) {
  std::vector<int> label_pool;
  std::vector<double> label_weights;
  for (int node : g.nodes) {
    const int deg = g.out_degree(node);
    if (deg > 0) {
      label_pool.push_back(node);
      label_weights.push_back(static_cast<double>(deg));
    }
  }
  if (label_pool.empty()) {
    if (g.nodes.size() == 1 && *g.nodes.begin() == g.root) {
      out.tokens.assign(seq_len, g.root);
      out.label = g.root;
      return;
    }
    throw std::domain_error("generate_training_set: graph has no eligible label tokens");
  }
  const int label = label_pool[rng.next_weighted(label_weights)];

  std::vector<int> filler_pool = g.out_neighbors(g.root);
  if (filler_pool.empty()) filler_pool.push_back(g.root);

  out.tokens.resize(seq_len);
  out.tokens[seq_len - 1] = g.root;
  for (int i = 0; i < seq_len - 1; ++i)
    out.tokens[i] = filler_pool[rng.next_below(static_cast<int>(filler_pool.size()))];
  out.tokens[rng.next_below(seq_len - 1)] = label;  // label inside the input
  out.label = label;
}

}  // namespace detail

// Training sequences: uniform last token, label drawn by out-degree weight,
// label placed uniformly among the first T-1 slots, remaining slots uniform
// over the root's out-neighbors.
inline Dataset generate_training_set(const Topic& topic, int sample_count, int seq_len,
                                     std::uint64_t seed, const std::string& source = "a") {
  if (sample_count < 1) throw std::invalid_argument("generate_training_set: need samples");
  if (seq_len < 2) throw std::invalid_argument("generate_training_set: sequence length < 2");
  Rng rng(seed);
  Dataset ds;
  ds.token_count = topic.token_count;
  ds.source = source;
  ds.samples.resize(sample_count);
  for (int i = 0; i < sample_count; ++i) {
    const int k = rng.next_below(topic.token_count);
    detail::sample_from_graph(topic.graphs[k], seq_len, rng, ds.samples[i]);
  }
  return ds;
}

// Adds an edge label -> x for every token x of each sample, grouped by the
// sample's last token. Label self-loops are kept (the label is in the input).
inline Topic reconstruct_tpgs(const Dataset& ds) {
  if (ds.samples.empty()) throw std::invalid_argument("reconstruct_tpgs: empty dataset");
  Topic t;
  t.token_count = ds.token_count;
  t.graphs.resize(ds.token_count);
  for (int k = 0; k < ds.token_count; ++k) {
    t.graphs[k].root = k;
    t.graphs[k].nodes.insert(k);
  }
  for (const auto& s : ds.samples) {
    Tpg& g = t.graphs[s.last()];
    for (int x : s.tokens) {
      g.nodes.insert(x);
      g.edges.insert({s.label, x});
    }
    g.nodes.insert(s.label);
  }
  return t;
}

// Grows the dataset in batches until it reconstructs the topic exactly, or
// the budget is exhausted. Verifies the Assumption-style round-trip the
// experiment pipeline depends on.
inline Dataset generate_reconstructing_training_set(const Topic& topic, int sample_count,
                                                    int seq_len, std::uint64_t seed,
                                                    const std::string& source = "a",
                                                    int budget_factor = 10) {
  Dataset ds = generate_training_set(topic, sample_count, seq_len, seed, source);
  int batches = 1;
  while (!(reconstruct_tpgs(ds) == topic)) {
    if (batches >= budget_factor)
      throw std::runtime_error(
          "generate_reconstructing_training_set: reconstruction budget exhausted");
    Dataset extra = generate_training_set(topic, sample_count, seq_len,
                                          split_seed(seed, static_cast<std::uint64_t>(batches)),
                                          source);
    ds.samples.insert(ds.samples.end(), extra.samples.begin(), extra.samples.end());
    ++batches;
  }
  return ds;
}

inline Dataset merge_datasets(const Dataset& a, const Dataset& b) {
  if (a.token_count != b.token_count)
    throw std::invalid_argument("merge_datasets: vocabulary sizes differ");
  Dataset out = a;
  out.source = a.source + b.source;
  out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  return out;
}

// Test inputs: uniform last token, remaining tokens drawn from the graph's
// nodes with per-token weight 2^-r where r is the token's component rank
// (0 = highest priority present). Two ranks of sizes 2 and 1 give 0.4/0.4/0.2.
inline std::vector<int> generate_test_sequence(const Topic& topic, int seq_len, Rng& rng) {
  if (seq_len < 2) throw std::invalid_argument("generate_test_sequence: length < 2");
  const int k = rng.next_below(topic.token_count);
  const Tpg& g = topic.graphs[k];
  const SccInfo scc = tarjan_scc(g);

  std::vector<int> pool(g.nodes.begin(), g.nodes.end());
  std::vector<double> weights(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int ci = scc.component_of.at(pool[i]);
    int rank = 0;  // number of components strictly above this token
    for (std::size_t m = 0; m < scc.components.size(); ++m) {
      const int cm = static_cast<int>(m);
      if (cm != ci && scc.comp_reach[cm][ci]) ++rank;
    }
    weights[i] = std::pow(2.0, -rank);
  }
  std::vector<int> seq(seq_len);
  for (int i = 0; i < seq_len - 1; ++i) seq[i] = pool[rng.next_weighted(weights)];
  seq[seq_len - 1] = k;
  return seq;
}

// Per-token sampling weights used by generate_test_sequence, keyed by node.
inline std::vector<std::pair<int, double>> test_sequence_weights(const Tpg& g) {
  const SccInfo scc = tarjan_scc(g);
  std::vector<std::pair<int, double>> out;
  double total = 0.0;
  for (int node : g.nodes) {
    const int ci = scc.component_of.at(node);
    int rank = 0;
    for (std::size_t m = 0; m < scc.components.size(); ++m) {
      const int cm = static_cast<int>(m);
      if (cm != ci && scc.comp_reach[cm][ci]) ++rank;
    }
    out.push_back({node, std::pow(2.0, -rank)});
    total += out.back().second;
  }
  for (auto& [node, w] : out) w /= total;
  return out;
}

// Line format: "k_last | t1 t2 ... tT | y".
inline std::string dataset_to_text(const Dataset& ds) {
  std::ostringstream out;
  out << ds.token_count << ' ' << ds.source << '\n';
  for (const auto& s : ds.samples) {
    out << s.last() << " |";
    for (int t : s.tokens) out << ' ' << t;
    out << " | " << s.label << '\n';
  }
  return out.str();
}

inline Dataset dataset_from_text(const std::string& text) {
  std::istringstream in(text);
  Dataset ds;
  if (!(in >> ds.token_count >> ds.source))
    throw std::runtime_error("dataset_from_text: bad header");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SequenceSample s;
    int last = 0;
    std::string bar;
    if (!(ls >> last >> bar) || bar != "|") throw std::runtime_error("dataset_from_text: bad row");
    std::string tok;
    while (ls >> tok) {
      if (tok == "|") break;
      s.tokens.push_back(std::stoi(tok));
    }
    if (!(ls >> s.label)) throw std::runtime_error("dataset_from_text: missing label");
    if (s.tokens.empty() || s.tokens.back() != last)
      throw std::runtime_error("dataset_from_text: last-token mismatch");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << dataset_to_text(ds);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_text(buf.str());
}

}  // namespace topicshift
