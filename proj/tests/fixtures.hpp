#pragma once

#include <array>
#include <set>
#include <vector>

#include "topicshift/datagen.hpp"
#include "topicshift/tpg.hpp"

namespace fixtures {

// Hand-built five-token pair of topics with a known priority chain for the
// conditioning token 3: base graph has 4 > 2 > {0,1} > 3, the overlay graph
// ties 3 into the {0,1} component, so the union orders 4 > 2 > {0,1,3}.
inline topicshift::Tpg chain_graph_a() {
  topicshift::Tpg g;
  g.root = 3;
  g.nodes = {0, 1, 2, 3, 4};
  g.edges = {{4, 4}, {4, 2}, {4, 3}, {2, 2}, {2, 0}, {2, 3},
             {0, 0}, {0, 1}, {0, 3}, {1, 1}, {1, 0}, {1, 3}};
  return g;
}

inline topicshift::Tpg chain_graph_b() {
  topicshift::Tpg g;
  g.root = 3;
  g.nodes = {0, 1, 3};
  g.edges = {{3, 3}, {3, 1}, {1, 1}, {1, 3}, {1, 0}, {0, 0}, {0, 3}};
  return g;
}

inline topicshift::Tpg singleton_graph(int k) {
  topicshift::Tpg g;
  g.root = k;
  g.nodes = {k};
  return g;
}

// Topics over K=5 whose only non-trivial graph conditions on token 3.
inline topicshift::Topic chain_topic_a() {
  topicshift::Topic t;
  t.token_count = 5;
  for (int k = 0; k < 5; ++k) t.graphs.push_back(singleton_graph(k));
  t.graphs[3] = chain_graph_a();
  return t;
}

inline topicshift::Topic chain_topic_b() {
  topicshift::Topic t;
  t.token_count = 5;
  for (int k = 0; k < 5; ++k) t.graphs.push_back(singleton_graph(k));
  t.graphs[3] = chain_graph_b();
  return t;
}

// Four-sequence datasets whose reconstruction is exactly the graph above.
inline topicshift::Dataset chain_dataset_a() {
  topicshift::Dataset ds;
  ds.token_count = 5;
  ds.source = "a";
  ds.samples = {
      {{4, 2, 4, 3}, 4},
      {{2, 0, 2, 3}, 2},
      {{0, 1, 0, 3}, 0},
      {{1, 0, 1, 3}, 1},
  };
  return ds;
}

inline topicshift::Dataset chain_dataset_b() {
  topicshift::Dataset ds;
  ds.token_count = 5;
  ds.source = "b";
  ds.samples = {
      {{3, 1, 3, 3}, 3},
      {{1, 3, 0, 3}, 1},
      {{0, 3, 0, 3}, 0},
      {{1, 0, 1, 3}, 1},
  };
  return ds;
}

}  // namespace fixtures
