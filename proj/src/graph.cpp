#include "riskgraph/graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <unordered_map>

#include "riskgraph/error.hpp"

namespace riskgraph {

NodeSet make_node_set(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

bool contains(const NodeSet& s, NodeId v) { return std::binary_search(s.begin(), s.end(), v); }

void check_ids(std::size_t n, const NodeSet& s) {
  for (NodeId v : s) {
    if (v >= n) throw Error(errc::kInvalidNode, "node id out of range", std::to_string(v));
  }
}

void check_disjoint(const NodeSet& x, const NodeSet& y, const NodeSet& z) {
  auto overlap = [](const NodeSet& a, const NodeSet& b) {
    NodeSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return !out.empty();
  };
  if (overlap(x, y) || overlap(x, z) || overlap(y, z)) {
    throw Error(errc::kOverlappingSets, "x, y and z must be pairwise disjoint");
  }
}

}  // namespace

Dag::Dag(std::vector<std::string> names, const std::vector<std::pair<NodeId, NodeId>>& edges)
    : names_(std::move(names)), parents_(names_.size()), children_(names_.size()) {
  std::unordered_map<std::string, NodeId> seen;
  for (NodeId v = 0; v < names_.size(); ++v) {
    if (names_[v].empty()) throw Error(errc::kInvalidNetwork, "empty node name", std::to_string(v));
    if (!seen.emplace(names_[v], v).second) {
      throw Error(errc::kInvalidNetwork, "duplicate node name", names_[v]);
    }
  }
  for (auto [from, to] : edges) {
    if (from >= size() || to >= size()) {
      throw Error(errc::kInvalidNode, "edge endpoint out of range");
    }
    if (from == to) throw Error(errc::kCycleDetected, "self-loop", names_[from]);
    auto& ps = parents_[to];
    if (std::find(ps.begin(), ps.end(), from) != ps.end()) {
      throw Error(errc::kInvalidNetwork, "duplicate edge", names_[from] + "->" + names_[to]);
    }
    ps.push_back(from);
    children_[from].push_back(to);
  }
  order_ = riskgraph::topological_order(size(), parents_);
}

Dag Dag::from_named_edges(std::vector<std::string> names,
                          const std::vector<std::pair<std::string, std::string>>& edges) {
  std::unordered_map<std::string, NodeId> index;
  for (NodeId v = 0; v < names.size(); ++v) index.emplace(names[v], v);
  std::vector<std::pair<NodeId, NodeId>> ids;
  for (const auto& [a, b] : edges) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end()) throw Error(errc::kInvalidNode, "unknown node in edge", a);
    if (ib == index.end()) throw Error(errc::kInvalidNode, "unknown node in edge", b);
    ids.emplace_back(ia->second, ib->second);
  }
  return Dag(std::move(names), ids);
}

std::optional<NodeId> Dag::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<NodeId>(it - names_.begin());
}

NodeId Dag::index_of(const std::string& name) const {
  if (auto v = find(name)) return *v;
  throw Error(errc::kInvalidNode, "unknown node", name);
}

bool Dag::has_edge(NodeId from, NodeId to) const {
  const auto& ps = parents_.at(to);
  return std::find(ps.begin(), ps.end(), from) != ps.end();
}

std::vector<std::pair<NodeId, NodeId>> Dag::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId v = 0; v < size(); ++v) {
    for (NodeId p : parents_[v]) out.emplace_back(p, v);
  }
  return out;
}

std::size_t Dag::edge_count() const noexcept {
  std::size_t n = 0;
  for (const auto& ps : parents_) n += ps.size();
  return n;
}

UndirectedGraph::UndirectedGraph(std::vector<std::string> names)
    : names_(std::move(names)), adjacency_(names_.size()) {}

bool UndirectedGraph::has_edge(NodeId a, NodeId b) const { return adjacency_.at(a).count(b) > 0; }

void UndirectedGraph::add_edge(NodeId a, NodeId b) {
  if (a == b) return;
  adjacency_.at(a).insert(b);
  adjacency_.at(b).insert(a);
}

void UndirectedGraph::remove_edge(NodeId a, NodeId b) {
  adjacency_.at(a).erase(b);
  adjacency_.at(b).erase(a);
}

std::vector<std::pair<NodeId, NodeId>> UndirectedGraph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId a = 0; a < size(); ++a) {
    for (NodeId b : adjacency_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

std::vector<NodeId> topological_order(std::size_t n,
                                      const std::vector<std::vector<NodeId>>& parents) {
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<NodeId>> children(n);
  for (NodeId v = 0; v < n; ++v) {
    pending[v] = parents[v].size();
    for (NodeId p : parents[v]) children[p].push_back(v);
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId v = 0; v < n; ++v) {
    if (pending[v] == 0) ready.push(v);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    NodeId v = ready.top();
    ready.pop();
    order.push_back(v);
    for (NodeId c : children[v]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) throw Error(errc::kCycleDetected, "graph contains a directed cycle");
  return order;
}

std::vector<NodeId> topological_order(const Dag& dag) { return dag.topological_order(); }

namespace {

NodeSet closure(const Dag& dag, NodeId x, bool upward) {
  std::vector<bool> seen(dag.size(), false);
  std::deque<NodeId> work{x};
  while (!work.empty()) {
    NodeId v = work.front();
    work.pop_front();
    for (NodeId w : upward ? dag.parents(v) : dag.children(v)) {
      if (!seen[w]) {
        seen[w] = true;
        work.push_back(w);
      }
    }
  }
  NodeSet out;
  for (NodeId v = 0; v < dag.size(); ++v) {
    if (seen[v] && v != x) out.push_back(v);
  }
  return out;
}

}  // namespace

NodeSet ancestors(const Dag& dag, NodeId x) {
  check_ids(dag.size(), {x});
  return closure(dag, x, true);
}

NodeSet descendants(const Dag& dag, NodeId x) {
  check_ids(dag.size(), {x});
  return closure(dag, x, false);
}

NodeSet ancestral_set(const Dag& dag, const NodeSet& nodes) {
  check_ids(dag.size(), nodes);
  std::vector<bool> seen(dag.size(), false);
  std::deque<NodeId> work(nodes.begin(), nodes.end());
  for (NodeId v : nodes) seen[v] = true;
  while (!work.empty()) {
    NodeId v = work.front();
    work.pop_front();
    for (NodeId p : dag.parents(v)) {
      if (!seen[p]) {
        seen[p] = true;
        work.push_back(p);
      }
    }
  }
  NodeSet out;
  for (NodeId v = 0; v < dag.size(); ++v) {
    if (seen[v]) out.push_back(v);
  }
  return out;
}

UndirectedGraph moralize(const Dag& dag) {
  UndirectedGraph g(dag.names());
  for (NodeId v = 0; v < dag.size(); ++v) {
    const auto& ps = dag.parents(v);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      g.add_edge(ps[i], v);
      for (std::size_t j = i + 1; j < ps.size(); ++j) g.add_edge(ps[i], ps[j]);
    }
  }
  return g;
}

UndirectedGraph moralize(const UndirectedGraph& graph) { return graph; }

bool d_separated(const Dag& dag, const NodeSet& x, const NodeSet& y, const NodeSet& z) {
  check_ids(dag.size(), x);
  check_ids(dag.size(), y);
  check_ids(dag.size(), z);
  check_disjoint(x, y, z);
  if (x.empty() || y.empty()) return true;

  NodeSet all = x;
  all.insert(all.end(), y.begin(), y.end());
  all.insert(all.end(), z.begin(), z.end());
  const NodeSet anc = ancestral_set(dag, make_node_set(all));

  // Moral graph restricted to the ancestral set; ancestors of the set have
  // all their parents inside it, so marrying within the set is exact.
  std::vector<bool> in_anc(dag.size(), false);
  for (NodeId v : anc) in_anc[v] = true;
  std::vector<std::vector<NodeId>> adj(dag.size());
  for (NodeId v : anc) {
    const auto& ps = dag.parents(v);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      adj[v].push_back(ps[i]);
      adj[ps[i]].push_back(v);
      for (std::size_t j = i + 1; j < ps.size(); ++j) {
        adj[ps[i]].push_back(ps[j]);
        adj[ps[j]].push_back(ps[i]);
      }
    }
  }

  std::vector<bool> blocked(dag.size(), false);
  for (NodeId v : z) blocked[v] = true;
  std::vector<bool> seen(dag.size(), false);
  std::deque<NodeId> work;
  for (NodeId v : x) {
    seen[v] = true;
    work.push_back(v);
  }
  while (!work.empty()) {
    NodeId v = work.front();
    work.pop_front();
    if (contains(y, v)) return false;
    for (NodeId w : adj[v]) {
      if (in_anc[w] && !seen[w] && !blocked[w]) {
        seen[w] = true;
        work.push_back(w);
      }
    }
  }
  return true;
}

namespace {

// State of the active-trail search: arriving at a node from a child (moving
// up) or from a parent (moving down).
enum class Direction { kUp = 0, kDown = 1 };

}  // namespace

std::vector<NodeId> active_trail(const Dag& dag, const NodeSet& x, const NodeSet& y,
                                 const NodeSet& z) {
  check_ids(dag.size(), x);
  check_ids(dag.size(), y);
  check_ids(dag.size(), z);
  check_disjoint(x, y, z);
  if (x.empty() || y.empty()) return {};

  const std::size_t n = dag.size();
  std::vector<bool> in_z(n, false);
  for (NodeId v : z) in_z[v] = true;
  // A collider is active when it or one of its descendants is observed.
  std::vector<bool> has_observed_desc(n, false);
  for (NodeId v : ancestral_set(dag, z)) has_observed_desc[v] = true;

  using State = std::pair<NodeId, Direction>;
  auto key = [](const State& s) { return 2 * s.first + static_cast<std::size_t>(s.second); };
  std::vector<bool> visited(2 * n, false);
  std::vector<std::ptrdiff_t> prev(2 * n, -1);
  std::deque<State> work;
  for (NodeId v : x) {
    State s{v, Direction::kUp};
    visited[key(s)] = true;
    work.push_back(s);
  }
  while (!work.empty()) {
    State s = work.front();
    work.pop_front();
    auto [v, dir] = s;
    if (!in_z[v] && contains(y, v)) {
      std::vector<NodeId> path;
      for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(key(s)); k >= 0; k = prev[k]) {
        NodeId node = static_cast<NodeId>(k) / 2;
        if (path.empty() || path.back() != node) path.push_back(node);
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    auto visit = [&](NodeId w, Direction d) {
      State t{w, d};
      if (!visited[key(t)]) {
        visited[key(t)] = true;
        prev[key(t)] = static_cast<std::ptrdiff_t>(key(s));
        work.push_back(t);
      }
    };
    if (dir == Direction::kUp && !in_z[v]) {
      for (NodeId p : dag.parents(v)) visit(p, Direction::kUp);
      for (NodeId c : dag.children(v)) visit(c, Direction::kDown);
    } else if (dir == Direction::kDown) {
      if (!in_z[v]) {
        for (NodeId c : dag.children(v)) visit(c, Direction::kDown);
      }
      if (has_observed_desc[v]) {
        for (NodeId p : dag.parents(v)) visit(p, Direction::kUp);
      }
    }
  }
  return {};
}

bool d_separated_by_paths(const Dag& dag, const NodeSet& x, const NodeSet& y,
                          const NodeSet& z) {
  return active_trail(dag, x, y, z).empty();
}

std::vector<LocalMarkov> local_markov_pairs(const Dag& dag) {
  std::vector<LocalMarkov> out;
  out.reserve(dag.size());
  for (NodeId v = 0; v < dag.size(); ++v) {
    NodeSet desc = descendants(dag, v);
    NodeSet pars = make_node_set(dag.parents(v));
    NodeSet rest;
    for (NodeId w = 0; w < dag.size(); ++w) {
      if (w != v && !contains(desc, w) && !contains(pars, w)) rest.push_back(w);
    }
    out.push_back({v, std::move(rest), std::move(pars)});
  }
  return out;
}

NodeSet markov_blanket(const Dag& dag, NodeId x) {
  check_ids(dag.size(), {x});
  std::vector<NodeId> out(dag.parents(x).begin(), dag.parents(x).end());
  for (NodeId c : dag.children(x)) {
    out.push_back(c);
    for (NodeId p : dag.parents(c)) {
      if (p != x) out.push_back(p);
    }
  }
  return make_node_set(std::move(out));
}

UndirectedGraph skeleton(const Dag& dag) {
  UndirectedGraph g(dag.names());
  for (auto [a, b] : dag.edges()) g.add_edge(a, b);
  return g;
}

std::vector<VStructure> v_structures(const Dag& dag) {
  std::vector<VStructure> out;
  for (NodeId c = 0; c < dag.size(); ++c) {
    const auto& ps = dag.parents(c);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t j = i + 1; j < ps.size(); ++j) {
        NodeId a = std::min(ps[i], ps[j]);
        NodeId b = std::max(ps[i], ps[j]);
        if (!dag.has_edge(a, b) && !dag.has_edge(b, a)) out.push_back({a, c, b});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool markov_equivalent(const Dag& a, const Dag& b) {
  if (a.size() != b.size()) return false;
  return skeleton(a).edges() == skeleton(b).edges() && v_structures(a) == v_structures(b);
}

bool is_polytree(const Dag& dag) {
  // Union-find over the skeleton; any edge joining an existing component is a cycle.
  std::vector<NodeId> root(dag.size());
  for (NodeId v = 0; v < dag.size(); ++v) root[v] = v;
  auto find = [&](NodeId v) {
    while (root[v] != v) v = root[v] = root[root[v]];
    return v;
  };
  for (auto [a, b] : dag.edges()) {
    NodeId ra = find(a);
    NodeId rb = find(b);
    if (ra == rb) return false;
    root[ra] = rb;
  }
  return true;
}

}  // namespace riskgraph
