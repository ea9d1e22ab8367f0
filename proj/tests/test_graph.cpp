#include <random>

#include "doctest.h"
#include "riskgraph/error.hpp"
#include "riskgraph/graph.hpp"
#include "support.hpp"

using namespace riskgraph;

namespace {

Dag chain() { return Dag::from_named_edges({"K", "D", "C"}, {{"K", "D"}, {"D", "C"}}); }
Dag collider() { return Dag::from_named_edges({"K", "D", "C"}, {{"K", "C"}, {"D", "C"}}); }

Dag capital() {
  return Dag::from_named_edges({"T", "F", "Y", "B", "W", "Q", "H", "R", "L", "A"},
                               {{"T", "B"}, {"T", "Y"}, {"T", "F"}, {"F", "Q"}, {"F", "W"}, {"Y", "R"},
                                {"R", "L"}, {"H", "L"}, {"W", "L"}, {"B", "A"}, {"Q", "A"}});
}

Dag freq_severity() {
  return Dag::from_named_edges({"X1", "X2", "N", "S"},
                               {{"X1", "N"}, {"X1", "S"}, {"X2", "N"}, {"X2", "S"}});
}

NodeSet ids(const Dag& d, std::initializer_list<const char*> names) {
  NodeSet out;
  for (const char* n : names) out.push_back(d.index_of(n));
  return make_node_set(out);
}

std::size_t position(const std::vector<NodeId>& order, NodeId v) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), v) - order.begin());
}

}  // namespace

TEST_CASE("construction rejects malformed graphs") {
  CHECK_THROWS_AS(Dag::from_named_edges({"A", "B"}, {{"A", "B"}, {"B", "A"}}), Error);
  try {
    Dag::from_named_edges({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}, {"C", "A"}});
    FAIL("cycle accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "CycleDetected");
  }
  CHECK_THROWS_AS(Dag::from_named_edges({"A"}, {{"A", "A"}}), Error);
  CHECK_THROWS_AS(Dag::from_named_edges({"A", "B"}, {{"A", "B"}, {"A", "B"}}), Error);
  CHECK_THROWS_AS(Dag::from_named_edges({"A", "A"}, {}), Error);
  CHECK_THROWS_AS(Dag::from_named_edges({""}, {}), Error);
}

TEST_CASE("topological order") {
  const Dag c = chain();
  CHECK(c.topological_order() == std::vector<NodeId>{0, 1, 2});

  const Dag edgeless({"A", "B", "C"}, {});
  CHECK(edgeless.topological_order() == std::vector<NodeId>{0, 1, 2});

  const Dag cap = capital();
  const auto& order = cap.topological_order();
  REQUIRE(order.size() == 10);
  for (auto [a, b] : cap.edges()) CHECK(position(order, a) < position(order, b));
  for (const char* early : {"T", "F"}) {
    for (const char* late : {"B", "W", "Y"}) {
      CHECK(position(order, cap.index_of(early)) < position(order, cap.index_of(late)));
    }
  }
  CHECK(position(order, cap.index_of("L")) >= 8);
  CHECK(position(order, cap.index_of("A")) >= 8);
}

TEST_CASE("ancestors and descendants") {
  const Dag c = chain();
  CHECK(ancestors(c, 2) == NodeSet{0, 1});
  CHECK(descendants(c, 0) == NodeSet{1, 2});
  CHECK(ancestors(c, 0).empty());

  const Dag bf = Dag::from_named_edges({"alpha", "beta", "phi", "tau", "psi", "C"},
                                       {{"alpha", "phi"}, {"beta", "phi"}, {"phi", "C"}, {"tau", "C"}, {"psi", "C"}});
  CHECK(ancestors(bf, bf.index_of("C")) == ids(bf, {"alpha", "beta", "phi", "tau", "psi"}));
}

TEST_CASE("moralize") {
  const UndirectedGraph m = moralize(collider());
  CHECK(m.has_edge(0, 2));
  CHECK(m.has_edge(1, 2));
  CHECK(m.has_edge(0, 1));

  const UndirectedGraph mc = moralize(chain());
  CHECK(mc.has_edge(0, 1));
  CHECK(mc.has_edge(1, 2));
  CHECK_FALSE(mc.has_edge(0, 2));

  const Dag fs = freq_severity();
  const UndirectedGraph mf = moralize(fs);
  CHECK(mf.has_edge(fs.index_of("X1"), fs.index_of("X2")));
  CHECK_FALSE(mf.has_edge(fs.index_of("N"), fs.index_of("S")));
  CHECK(mf.edges().size() == 5);

  CHECK(moralize(mf) == mf);
}

TEST_CASE("d-separation examples") {
  const Dag c = chain();
  CHECK(d_separated(c, {0}, {2}, {1}));
  CHECK_FALSE(d_separated(c, {0}, {2}, {}));

  const Dag col = collider();
  CHECK(d_separated(col, {0}, {1}, {}));
  CHECK_FALSE(d_separated(col, {0}, {1}, {2}));

  const Dag auto_net = Dag::from_named_edges({"B", "P", "S", "C"}, {{"B", "P"}, {"P", "C"}, {"S", "C"}});
  CHECK(d_separated(auto_net, ids(auto_net, {"B"}), ids(auto_net, {"C"}), ids(auto_net, {"P"})));
  CHECK_FALSE(d_separated(auto_net, ids(auto_net, {"B"}), ids(auto_net, {"C"}), {}));

  CHECK_THROWS_AS(d_separated(c, {0}, {0}, {}), Error);
  CHECK_THROWS_AS(d_separated(c, {0}, {2}, {0}), Error);
  CHECK(d_separated(c, {}, {2}, {}));
}

TEST_CASE("active trail witnesses a connection") {
  const Dag col = collider();
  CHECK(active_trail(col, {0}, {1}, {}).empty());
  const auto trail = active_trail(col, {0}, {1}, {2});
  CHECK(trail == std::vector<NodeId>{0, 2, 1});
}

TEST_CASE("local Markov statements") {
  const Dag c = chain();
  const auto pairs = local_markov_pairs(c);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[2].node == 2);
  CHECK(pairs[2].non_descendants == NodeSet{0});
  CHECK(pairs[2].parents == NodeSet{1});

  const Dag two({"A", "B"}, {});
  const auto p2 = local_markov_pairs(two);
  CHECK(p2[0].non_descendants == NodeSet{1});
  CHECK(p2[0].parents.empty());
  CHECK(p2[1].non_descendants == NodeSet{0});

  const Dag score = Dag::from_named_edges({"X1", "X2", "X3", "S", "Y"},
                                          {{"X2", "S"}, {"X3", "S"}, {"S", "Y"}, {"X1", "Y"}});
  const auto y = local_markov_pairs(score)[score.index_of("Y")];
  CHECK(y.non_descendants == ids(score, {"X2", "X3"}));
  CHECK(y.parents == ids(score, {"X1", "S"}));
}

TEST_CASE("Markov blanket") {
  CHECK(markov_blanket(chain(), 1) == NodeSet{0, 2});
  CHECK(markov_blanket(collider(), 0) == NodeSet{1, 2});
  const Dag fs = freq_severity();
  CHECK(markov_blanket(fs, fs.index_of("X2")) == ids(fs, {"N", "S", "X1"}));
}

TEST_CASE("Markov equivalence") {
  const Dag fwd = chain();
  const Dag rev = Dag::from_named_edges({"K", "D", "C"}, {{"D", "K"}, {"C", "D"}});
  const Dag fork = Dag::from_named_edges({"K", "D", "C"}, {{"D", "K"}, {"D", "C"}});
  CHECK(markov_equivalent(fwd, rev));
  CHECK(markov_equivalent(fwd, fork));
  CHECK_FALSE(markov_equivalent(fwd, collider()));
  CHECK(v_structures(collider()).size() == 1);
  CHECK(is_polytree(fwd));
  CHECK_FALSE(is_polytree(freq_severity()));
}

TEST_CASE("property: path blocking agrees with the moral ancestral graph") {
  std::mt19937_64 rng(20240611);
  std::size_t checked = 0;
  for (int g = 0; g < 60; ++g) {
    const std::size_t n = 2 + rng() % 7;
    const Dag dag = testsupport::random_dag(rng, n, 0.35);
    for (int k = 0; k < 40; ++k) {
      NodeSet x, y, z;
      for (NodeId v = 0; v < n; ++v) {
        switch (rng() % 4) {
          case 0: x.push_back(v); break;
          case 1: y.push_back(v); break;
          case 2: z.push_back(v); break;
          default: break;
        }
      }
      const bool moral = d_separated(dag, x, y, z);
      CHECK(moral == d_separated_by_paths(dag, x, y, z));
      CHECK(moral == d_separated(dag, y, x, z));
      CHECK(moral == active_trail(dag, x, y, z).empty());
      ++checked;
    }
  }
  CHECK(checked == 2400);
}

TEST_CASE("property: moralization contains every edge and marries co-parents") {
  std::mt19937_64 rng(7);
  for (int g = 0; g < 50; ++g) {
    const Dag dag = testsupport::random_dag(rng, 2 + rng() % 7, 0.4);
    const UndirectedGraph m = moralize(dag);
    for (auto [a, b] : dag.edges()) CHECK(m.has_edge(a, b));
    for (NodeId v = 0; v < dag.size(); ++v) {
      const auto& ps = dag.parents(v);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        for (std::size_t j = i + 1; j < ps.size(); ++j) CHECK(m.has_edge(ps[i], ps[j]));
      }
    }
    CHECK(moralize(m) == m);
  }
}
