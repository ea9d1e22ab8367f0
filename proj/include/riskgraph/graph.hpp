#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace riskgraph {

// Nodes are identified by position; names exist for I/O and display only.
using NodeId = std::size_t;
// Sorted, duplicate-free list of node ids.
using NodeSet = std::vector<NodeId>;

NodeSet make_node_set(std::vector<NodeId> ids);

// Directed acyclic graph over named nodes. Immutable once constructed; the
// constructor rejects cycles, self-loops, duplicate edges and bad names.
class Dag {
 public:
  Dag() = default;
  Dag(std::vector<std::string> names, const std::vector<std::pair<NodeId, NodeId>>& edges);

  static Dag from_named_edges(std::vector<std::string> names,
                              const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(NodeId v) const { return names_.at(v); }
  std::optional<NodeId> find(const std::string& name) const;
  NodeId index_of(const std::string& name) const;  // throws InvalidNode

  // Parents in insertion order of their edges.
  const std::vector<NodeId>& parents(NodeId v) const { return parents_.at(v); }
  const std::vector<NodeId>& children(NodeId v) const { return children_.at(v); }
  bool has_edge(NodeId from, NodeId to) const;
  std::vector<std::pair<NodeId, NodeId>> edges() const;
  std::size_t edge_count() const noexcept;

  // Precomputed at construction.
  const std::vector<NodeId>& topological_order() const noexcept { return order_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<NodeId>> parents_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<NodeId> order_;
};

class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::set<NodeId>& neighbors(NodeId v) const { return adjacency_.at(v); }
  bool has_edge(NodeId a, NodeId b) const;
  void add_edge(NodeId a, NodeId b);
  void remove_edge(NodeId a, NodeId b);
  // Edges as (low, high) pairs in lexicographic order.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  bool operator==(const UndirectedGraph& other) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::set<NodeId>> adjacency_;
};

// Kahn's algorithm, always releasing the lowest ready index first, so an
// edgeless graph comes back in insertion order. Throws CycleDetected.
std::vector<NodeId> topological_order(std::size_t n,
                                      const std::vector<std::vector<NodeId>>& parents);
std::vector<NodeId> topological_order(const Dag& dag);

NodeSet ancestors(const Dag& dag, NodeId x);
NodeSet descendants(const Dag& dag, NodeId x);
// Ancestral closure of a set, including the set itself.
NodeSet ancestral_set(const Dag& dag, const NodeSet& nodes);

UndirectedGraph moralize(const Dag& dag);
// An undirected graph has no parents to marry; this is the identity.
UndirectedGraph moralize(const UndirectedGraph& graph);

// Separation test on the moral graph of the ancestral set of x, y and z.
// Empty sets are allowed; an empty x or y is trivially separated.
// Throws OverlappingSets when x, y, z are not pairwise disjoint.
bool d_separated(const Dag& dag, const NodeSet& x, const NodeSet& y, const NodeSet& z);

// Active-trail reachability (path blocking). Must always agree with
// d_separated; kept as the second route for cross-checks.
bool d_separated_by_paths(const Dag& dag, const NodeSet& x, const NodeSet& y,
                          const NodeSet& z);

// Returns a node sequence witnessing an active trail from x to y given z, or
// empty when separated.
std::vector<NodeId> active_trail(const Dag& dag, const NodeSet& x, const NodeSet& y,
                                 const NodeSet& z);

struct LocalMarkov {
  NodeId node;
  NodeSet non_descendants;  // excludes parents and the node itself
  NodeSet parents;
};

std::vector<LocalMarkov> local_markov_pairs(const Dag& dag);

NodeSet markov_blanket(const Dag& dag, NodeId x);

// Undirected skeleton of a DAG.
UndirectedGraph skeleton(const Dag& dag);

struct VStructure {
  NodeId a;  // a < b
  NodeId collider;
  NodeId b;
  bool operator==(const VStructure&) const = default;
  auto operator<=>(const VStructure&) const = default;
};

std::vector<VStructure> v_structures(const Dag& dag);

// Same skeleton and same unshielded colliders.
bool markov_equivalent(const Dag& a, const Dag& b);

// True when the skeleton has no undirected cycle.
bool is_polytree(const Dag& dag);

}  // namespace riskgraph
