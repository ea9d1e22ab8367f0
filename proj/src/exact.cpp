#include "riskgraph/exact.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "riskgraph/error.hpp"

namespace riskgraph {

namespace {

bool contains(const NodeSet& s, NodeId v) { return std::binary_search(s.begin(), s.end(), v); }

bool subset(const NodeSet& a, const NodeSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

NodeSet intersect(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::size_t fill_in(const std::vector<std::set<NodeId>>& adj, const std::vector<bool>& gone,
                    NodeId v) {
  std::vector<NodeId> nb;
  for (NodeId w : adj[v]) {
    if (!gone[w]) nb.push_back(w);
  }
  std::size_t fill = 0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    for (std::size_t j = i + 1; j < nb.size(); ++j) {
      if (adj[nb[i]].count(nb[j]) == 0) ++fill;
    }
  }
  return fill;
}

struct EliminationTrace {
  EliminationOrder order;
  std::vector<NodeSet> cliques;  // {v} ∪ remaining neighbours at elimination time
};

EliminationTrace greedy_min_fill(const UndirectedGraph& graph, const NodeSet& exclude) {
  const std::size_t n = graph.size();
  std::vector<std::set<NodeId>> adj(n);
  for (NodeId v = 0; v < n; ++v) adj[v] = graph.neighbors(v);
  std::vector<bool> gone(n, false);
  EliminationTrace trace;
  std::size_t remaining = 0;
  for (NodeId v = 0; v < n; ++v) remaining += contains(exclude, v) ? 0 : 1;
  while (remaining-- > 0) {
    NodeId best = n;
    std::size_t best_fill = 0;
    for (NodeId v = 0; v < n; ++v) {
      if (gone[v] || contains(exclude, v)) continue;
      const std::size_t f = fill_in(adj, gone, v);
      if (best == n || f < best_fill) {
        best = v;
        best_fill = f;
      }
    }
    std::vector<NodeId> nb;
    for (NodeId w : adj[best]) {
      if (!gone[w]) nb.push_back(w);
    }
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        adj[nb[i]].insert(nb[j]);
        adj[nb[j]].insert(nb[i]);
      }
    }
    nb.push_back(best);
    trace.cliques.push_back(make_node_set(std::move(nb)));
    trace.order.push_back(best);
    gone[best] = true;
  }
  return trace;
}

}  // namespace

EliminationOrder min_fill_order(const UndirectedGraph& graph, const NodeSet& exclude) {
  return greedy_min_fill(graph, exclude).order;
}

EliminationOrder min_fill_order(const BayesNet& net, const NodeSet& exclude) {
  return min_fill_order(moralize(net.dag()), exclude);
}

std::vector<Factor> eliminate_factors(std::vector<Factor> factors, const EliminationOrder& order,
                                      double& log_scale) {
  for (NodeId v : order) {
    std::vector<Factor> touching;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      (f.in_scope(v) ? touching : rest).push_back(std::move(f));
    }
    if (touching.empty()) {
      factors = std::move(rest);
      continue;
    }
    Factor joined = product(touching);
    Factor summed = marginalize(joined, {v});
    const double z = summed.total();
    if (!(z > 0.0)) throw Error(errc::kZeroMass, "evidence has zero probability");
    for (double& x : summed.mutable_values()) x /= z;
    log_scale += std::log(z);
    rest.push_back(std::move(summed));
    factors = std::move(rest);
  }
  return factors;
}

Posterior eliminate(const BayesNet& net, const NodeSet& query, const Evidence& ev,
                    const std::optional<EliminationOrder>& order) {
  if (query.empty()) throw Error(errc::kInvalidArgument, "query must name at least one variable");
  for (NodeId q : query) {
    if (q >= net.size()) throw Error(errc::kInvalidNode, "query variable out of range");
  }
  ev.validate(net.cards());

  // Hard evidence on query variables stays as an indicator so the result
  // keeps the variable in scope.
  Evidence reducible;
  Evidence in_scope;
  for (const auto& [v, item] : ev.items()) {
    if (std::holds_alternative<HardEvidence>(item) && !contains(query, v)) {
      reducible.set(v, item);
    } else {
      in_scope.set(v, item);
    }
  }

  std::vector<Factor> factors;
  for (const auto& cpt : net.cpts()) factors.push_back(reduce(factor_from_cpt(cpt), reducible));
  // One unary factor per remaining item, so a likelihood counts once however
  // many families mention the variable.
  for (const auto& [v, item] : in_scope.items()) {
    const std::size_t c = net.variable(v).cardinality();
    Evidence single;
    single.set(v, item);
    factors.push_back(apply_evidence(Factor({v}, {c}, 1.0), single));
  }

  NodeSet keep = query;
  for (NodeId h : reducible.hard_nodes()) keep.push_back(h);
  keep = make_node_set(std::move(keep));

  EliminationOrder elim;
  if (order) {
    NodeSet expected;
    for (NodeId v = 0; v < net.size(); ++v) {
      if (!contains(keep, v)) expected.push_back(v);
    }
    if (make_node_set(*order) != expected || order->size() != expected.size()) {
      throw Error(errc::kInvalidArgument,
                  "elimination order must be a permutation of the non-query, non-observed variables");
    }
    elim = *order;
  } else {
    // Interaction graph of the reduced factors.
    UndirectedGraph g(net.dag().names());
    for (const auto& f : factors) {
      for (std::size_t i = 0; i < f.scope().size(); ++i) {
        for (std::size_t j = i + 1; j < f.scope().size(); ++j) g.add_edge(f.scope()[i], f.scope()[j]);
      }
    }
    elim = min_fill_order(g, keep);
  }

  double log_scale = 0.0;
  auto remaining = eliminate_factors(std::move(factors), elim, log_scale);
  std::vector<std::size_t> qcards;
  for (NodeId q : query) qcards.push_back(net.variable(q).cardinality());
  Factor joint(std::vector<NodeId>(query.begin(), query.end()), qcards, 1.0);
  for (const auto& f : remaining) joint = product(joint, f);
  joint = permute(joint, std::vector<NodeId>(query.begin(), query.end()));
  auto [normalized, z] = normalize(joint);
  return {std::move(normalized), log_scale + std::log(z)};
}

std::size_t CliqueTree::max_clique_size() const {
  std::size_t m = 0;
  for (const auto& c : cliques) m = std::max(m, c.size());
  return m;
}

CliqueTree build_junction_tree(const BayesNet& net) {
  CliqueTree tree;
  tree.cards = net.cards();
  tree.cpt_factors = net.factors();
  const auto trace = greedy_min_fill(moralize(net.dag()), {});

  // Keep maximal elimination cliques, in elimination order.
  for (std::size_t i = 0; i < trace.cliques.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < trace.cliques.size() && !dominated; ++j) {
      if (i == j) continue;
      const auto& a = trace.cliques[i];
      const auto& b = trace.cliques[j];
      dominated = subset(a, b) && (a.size() < b.size() || j < i);
    }
    if (!dominated) tree.cliques.push_back(trace.cliques[i]);
  }
  if (tree.cliques.empty()) tree.cliques.push_back({});

  // Kruskal on sepset size, heaviest first; ties by clique indices.
  struct Candidate {
    std::size_t weight, a, b;
  };
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < tree.cliques.size(); ++a) {
    for (std::size_t b = a + 1; b < tree.cliques.size(); ++b) {
      candidates.push_back({intersect(tree.cliques[a], tree.cliques[b]).size(), a, b});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.weight > y.weight; });
  std::vector<std::size_t> root(tree.cliques.size());
  std::iota(root.begin(), root.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (root[v] != v) v = root[v] = root[root[v]];
    return v;
  };
  for (const auto& c : candidates) {
    const std::size_t ra = find(c.a);
    const std::size_t rb = find(c.b);
    if (ra == rb) continue;
    root[ra] = rb;
    tree.edges.push_back({c.a, c.b, intersect(tree.cliques[c.a], tree.cliques[c.b])});
  }

  // Each CPT goes to the smallest clique holding its family.
  tree.assignment.assign(net.size(), 0);
  for (NodeId v = 0; v < net.size(); ++v) {
    NodeSet family = make_node_set(net.dag().parents(v));
    family = make_node_set([&] {
      auto f = family;
      f.push_back(v);
      return f;
    }());
    std::size_t best = tree.cliques.size();
    for (std::size_t c = 0; c < tree.cliques.size(); ++c) {
      if (subset(family, tree.cliques[c]) &&
          (best == tree.cliques.size() || tree.cliques[c].size() < tree.cliques[best].size())) {
        best = c;
      }
    }
    if (best == tree.cliques.size()) {
      throw Error(errc::kInvalidNetwork, "family not covered by any clique", net.variable(v).name);
    }
    tree.assignment[v] = best;
  }
  return tree;
}

std::vector<std::string> check_clique_tree(const CliqueTree& tree, const Dag& dag) {
  std::vector<std::string> problems;
  const std::size_t k = tree.cliques.size();
  if (tree.edges.size() + 1 != k) problems.push_back("edge count is not cliques - 1");

  std::vector<std::vector<std::size_t>> adj(k);
  for (const auto& e : tree.edges) {
    if (e.a >= k || e.b >= k) {
      problems.push_back("edge endpoint out of range");
      continue;
    }
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
    if (e.sepset != intersect(tree.cliques[e.a], tree.cliques[e.b])) {
      problems.push_back("sepset differs from clique intersection");
    }
  }
  std::vector<bool> seen(k, false);
  std::deque<std::size_t> work{0};
  if (k > 0) seen[0] = true;
  std::size_t reached = k > 0 ? 1 : 0;
  while (!work.empty()) {
    auto c = work.front();
    work.pop_front();
    for (auto d : adj[c]) {
      if (!seen[d]) {
        seen[d] = true;
        ++reached;
        work.push_back(d);
      }
    }
  }
  if (reached != k) problems.push_back("clique tree is not connected");

  // Running intersection: cliques containing v induce a connected subtree.
  for (NodeId v = 0; v < dag.size(); ++v) {
    std::vector<std::size_t> holders;
    for (std::size_t c = 0; c < k; ++c) {
      if (contains(tree.cliques[c], v)) holders.push_back(c);
    }
    if (holders.empty()) {
      problems.push_back("variable " + dag.name(v) + " is in no clique");
      continue;
    }
    std::vector<bool> mark(k, false);
    std::deque<std::size_t> q{holders.front()};
    mark[holders.front()] = true;
    std::size_t count = 1;
    while (!q.empty()) {
      auto c = q.front();
      q.pop_front();
      for (auto d : adj[c]) {
        if (!mark[d] && contains(tree.cliques[d], v)) {
          mark[d] = true;
          ++count;
          q.push_back(d);
        }
      }
    }
    if (count != holders.size()) {
      problems.push_back("running intersection fails for " + dag.name(v));
    }
  }

  for (NodeId v = 0; v < dag.size(); ++v) {
    auto family = dag.parents(v);
    family.push_back(v);
    const NodeSet fam = make_node_set(family);
    bool covered = false;
    for (const auto& c : tree.cliques) covered = covered || subset(fam, c);
    if (!covered) problems.push_back("family of " + dag.name(v) + " is not covered");
    if (v < tree.assignment.size() && tree.assignment[v] < k &&
        !subset(fam, tree.cliques[tree.assignment[v]])) {
      problems.push_back("CPT of " + dag.name(v) + " assigned to a clique missing its family");
    }
  }
  return problems;
}

namespace {

struct RootedTree {
  std::vector<std::size_t> bfs;          // clique visit order from root 0
  std::vector<std::ptrdiff_t> parent;    // parent clique, -1 for root
  std::vector<std::ptrdiff_t> up_edge;   // edge index to the parent
};

RootedTree root_tree(const CliqueTree& tree) {
  const std::size_t k = tree.cliques.size();
  RootedTree r{{}, std::vector<std::ptrdiff_t>(k, -1), std::vector<std::ptrdiff_t>(k, -1)};
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(k);
  for (std::size_t e = 0; e < tree.edges.size(); ++e) {
    adj[tree.edges[e].a].push_back({tree.edges[e].b, e});
    adj[tree.edges[e].b].push_back({tree.edges[e].a, e});
  }
  std::vector<bool> seen(k, false);
  std::deque<std::size_t> work{0};
  seen[0] = true;
  while (!work.empty()) {
    auto c = work.front();
    work.pop_front();
    r.bfs.push_back(c);
    for (auto [d, e] : adj[c]) {
      if (!seen[d]) {
        seen[d] = true;
        r.parent[d] = static_cast<std::ptrdiff_t>(c);
        r.up_edge[d] = static_cast<std::ptrdiff_t>(e);
        work.push_back(d);
      }
    }
  }
  return r;
}

Factor clique_scope_ones(const CliqueTree& tree, std::size_t c) {
  std::vector<std::size_t> cards;
  for (NodeId v : tree.cliques[c]) cards.push_back(tree.cards[v]);
  return Factor(std::vector<NodeId>(tree.cliques[c].begin(), tree.cliques[c].end()), cards, 1.0);
}

}  // namespace

CalibratedTree calibrate(const CliqueTree& tree, const Evidence& ev) {
  ev.validate(tree.cards);
  const std::size_t k = tree.cliques.size();
  CalibratedTree cal;
  cal.tree = &tree;
  cal.clique_beliefs.reserve(k);
  for (std::size_t c = 0; c < k; ++c) cal.clique_beliefs.push_back(clique_scope_ones(tree, c));
  for (std::size_t v = 0; v < tree.cpt_factors.size(); ++v) {
    auto& b = cal.clique_beliefs[tree.assignment[v]];
    b = product(b, tree.cpt_factors[v]);
  }
  // Evidence enters once, in the smallest clique holding the variable.
  for (const auto& [v, item] : ev.items()) {
    std::size_t best = k;
    for (std::size_t c = 0; c < k; ++c) {
      if (contains(tree.cliques[c], v) &&
          (best == k || tree.cliques[c].size() < tree.cliques[best].size())) {
        best = c;
      }
    }
    Evidence one;
    one.set(v, item);
    cal.clique_beliefs[best] = apply_evidence(cal.clique_beliefs[best], one);
  }

  const RootedTree rooted = root_tree(tree);
  cal.sepset_beliefs.resize(tree.edges.size());
  double log_z = 0.0;

  for (std::size_t i = rooted.bfs.size(); i-- > 1;) {
    const std::size_t c = rooted.bfs[i];
    const auto p = static_cast<std::size_t>(rooted.parent[c]);
    const auto e = static_cast<std::size_t>(rooted.up_edge[c]);
    Factor msg = marginalize_to(cal.clique_beliefs[c], tree.edges[e].sepset);
    const double z = msg.total();
    if (!(z > 0.0)) throw Error(errc::kZeroMass, "evidence has zero probability");
    for (double& x : msg.mutable_values()) x /= z;
    log_z += std::log(z);
    cal.clique_beliefs[p] = product(cal.clique_beliefs[p], msg);
    cal.sepset_beliefs[e] = std::move(msg);
  }
  {
    auto [root, z] = normalize(cal.clique_beliefs[0]);
    cal.clique_beliefs[0] = std::move(root);
    log_z += std::log(z);
  }
  for (std::size_t i = 1; i < rooted.bfs.size(); ++i) {
    const std::size_t c = rooted.bfs[i];
    const auto p = static_cast<std::size_t>(rooted.parent[c]);
    const auto e = static_cast<std::size_t>(rooted.up_edge[c]);
    Factor fresh = marginalize_to(cal.clique_beliefs[p], tree.edges[e].sepset);
    Factor updated = product(cal.clique_beliefs[c], divide(fresh, cal.sepset_beliefs[e]));
    cal.clique_beliefs[c] = normalize(updated).factor;
    cal.sepset_beliefs[e] = std::move(fresh);
  }
  cal.log_normalizer = log_z;
  return cal;
}

double calibration_gap(const CalibratedTree& cal) {
  double gap = 0.0;
  for (const auto& e : cal.tree->edges) {
    Factor a = marginalize_to(cal.clique_beliefs[e.a], e.sepset);
    Factor b = marginalize_to(cal.clique_beliefs[e.b], e.sepset);
    gap = std::max(gap, max_abs_diff(a, b));
  }
  return gap;
}

Factor clique_marginal(const CalibratedTree& cal, const NodeSet& vars) {
  const auto& cliques = cal.tree->cliques;
  std::size_t best = cliques.size();
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    if (subset(vars, cliques[c]) && (best == cliques.size() || cliques[c].size() < cliques[best].size())) {
      best = c;
    }
  }
  if (best == cliques.size()) {
    throw Error(errc::kVariableNotInScope, "variables do not share a clique");
  }
  Factor m = marginalize_to(cal.clique_beliefs[best], vars);
  return normalize(m).factor;
}

std::vector<Marginal> query_marginals(const CalibratedTree& cal, const std::vector<NodeId>& vars) {
  std::vector<Marginal> out;
  for (NodeId v : vars) {
    if (v >= cal.tree->cards.size()) {
      throw Error(errc::kVariableNotInScope, "variable not in any clique", std::to_string(v));
    }
    Factor m = clique_marginal(cal, {v});
    out.push_back({v, m.values()});
  }
  return out;
}

double ci_gap_exact(const BayesNet& net, const CiStatement& s, std::uint64_t cap) {
  if (net.state_space() <= cap) return ci_gap_numeric(net, s, cap);
  if (s.x.empty() || s.y.empty()) return 0.0;
  NodeSet all = s.x;
  all.insert(all.end(), s.y.begin(), s.y.end());
  all.insert(all.end(), s.z.begin(), s.z.end());
  all = make_node_set(all);
  if (all.size() != s.x.size() + s.y.size() + s.z.size()) {
    throw Error(errc::kOverlappingSets, "x, y and z must be disjoint");
  }
  return ci_gap(eliminate(net, all, {}).joint, s.x, s.y, s.z);
}

}  // namespace riskgraph
