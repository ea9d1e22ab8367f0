#pragma once

// Test-side helpers. The oracle here enumerates joint assignments directly
// from CPT rows and shares no code with the library's inference routines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "riskgraph/evidence.hpp"
#include "riskgraph/io.hpp"
#include "riskgraph/network.hpp"

namespace testsupport {

using riskgraph::BayesNet;
using riskgraph::Evidence;
using riskgraph::NodeId;

inline BayesNet desk_chain() {
  riskgraph::NetworkDocument doc;
  doc.variables = {{"K", {"0", "1"}}, {"D", {"0", "1"}}, {"C", {"0", "1"}}};
  doc.edges = {{"K", "D"}, {"D", "C"}};
  doc.cpts = {{"K", {}, {{0.5, 0.5}}},
              {"D", {"K"}, {{0.7, 0.3}, {0.2, 0.8}}},
              {"C", {"D"}, {{0.98, 0.02}, {0.9, 0.1}}}};
  return BayesNet::from_document(doc);
}

// Joint assignments in mixed radix, variable 0 slowest.
struct Assignments {
  std::vector<std::size_t> cards;
  std::size_t count() const {
    std::size_t n = 1;
    for (auto c : cards) n *= c;
    return n;
  }
  std::vector<std::size_t> decode(std::size_t i) const {
    std::vector<std::size_t> a(cards.size());
    for (std::size_t v = cards.size(); v-- > 0;) {
      a[v] = i % cards[v];
      i /= cards[v];
    }
    return a;
  }
};

inline double cpt_entry(const riskgraph::Cpt& cpt, const std::vector<std::size_t>& a) {
  std::size_t row = 0;
  for (std::size_t k = 0; k < cpt.parents.size(); ++k) row = row * cpt.parent_cards[k] + a[cpt.parents[k]];
  return cpt.probs[row * cpt.child_card + a[cpt.child]];
}

inline double evidence_weight(const Evidence& ev, const std::vector<std::size_t>& a) {
  double w = 1.0;
  for (const auto& [v, item] : ev.items()) {
    if (const auto* h = std::get_if<riskgraph::HardEvidence>(&item)) {
      if (a[v] != h->state) return 0.0;
    } else {
      w *= std::get<riskgraph::SoftEvidence>(item).likelihood[a[v]];
    }
  }
  return w;
}

// Unnormalized weights of every joint assignment.
inline std::vector<double> oracle_joint(const BayesNet& net, const Evidence& ev) {
  Assignments as{net.cards()};
  std::vector<double> out(as.count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto a = as.decode(i);
    double w = evidence_weight(ev, a);
    for (const auto& cpt : net.cpts()) {
      if (w == 0.0) break;
      w *= cpt_entry(cpt, a);
    }
    out[i] = w;
  }
  return out;
}

inline double oracle_evidence_probability(const BayesNet& net, const Evidence& ev) {
  double s = 0.0;
  for (double w : oracle_joint(net, ev)) s += w;
  return s;
}

// Normalized marginals for every variable.
inline std::vector<std::vector<double>> oracle_marginals(const BayesNet& net, const Evidence& ev) {
  Assignments as{net.cards()};
  auto joint = oracle_joint(net, ev);
  std::vector<std::vector<double>> m;
  for (auto c : as.cards) m.emplace_back(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i] == 0.0) continue;
    auto a = as.decode(i);
    for (std::size_t v = 0; v < a.size(); ++v) m[v][a[v]] += joint[i];
    total += joint[i];
  }
  for (auto& row : m) {
    for (double& x : row) x /= total;
  }
  return m;
}

inline double item_weight(const Evidence& ev, NodeId v, std::size_t state) {
  const auto* item = ev.find(v);
  if (!item) return 1.0;
  if (const auto* h = std::get_if<riskgraph::HardEvidence>(item)) return h->state == state ? 1.0 : 0.0;
  return std::get<riskgraph::SoftEvidence>(*item).likelihood[state];
}

// Same marginals as oracle_marginals, enumerating only variables with
// children; each childless variable is summed in closed form given its
// parents. Reaches networks whose full joint is too large to list.
inline std::vector<std::vector<double>> oracle_marginals_by_leaves(const BayesNet& net, const Evidence& ev) {
  const auto& dag = net.dag();
  std::vector<NodeId> inner, leaves;
  for (NodeId v = 0; v < net.size(); ++v) (dag.children(v).empty() ? leaves : inner).push_back(v);
  Assignments as;
  for (NodeId v : inner) as.cards.push_back(net.variable(v).cardinality());
  std::vector<std::vector<double>> m;
  for (NodeId v = 0; v < net.size(); ++v) m.emplace_back(net.variable(v).cardinality(), 0.0);
  std::vector<std::size_t> a(net.size(), 0);
  std::vector<std::vector<double>> lw(leaves.size());
  double total = 0.0;
  for (std::size_t i = 0; i < as.count(); ++i) {
    const auto inner_a = as.decode(i);
    for (std::size_t k = 0; k < inner.size(); ++k) a[inner[k]] = inner_a[k];
    double w = 1.0;
    for (NodeId v : inner) {
      w *= item_weight(ev, v, a[v]) * cpt_entry(net.cpt(v), a);
      if (w == 0.0) break;
    }
    for (std::size_t k = 0; k < leaves.size() && w != 0.0; ++k) {
      const NodeId l = leaves[k];
      lw[k].assign(net.variable(l).cardinality(), 0.0);
      double sum = 0.0;
      for (std::size_t s = 0; s < lw[k].size(); ++s) {
        a[l] = s;
        sum += lw[k][s] = item_weight(ev, l, s) * cpt_entry(net.cpt(l), a);
      }
      for (double& x : lw[k]) x = sum > 0.0 ? x / sum : 0.0;
      w *= sum;
    }
    if (w == 0.0) continue;
    total += w;
    for (NodeId v : inner) m[v][a[v]] += w;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      for (std::size_t s = 0; s < lw[k].size(); ++s) m[leaves[k]][s] += w * lw[k][s];
    }
  }
  for (auto& row : m) {
    for (double& x : row) x /= total;
  }
  return m;
}

// Normalized joint over a set of variables, laid out like a Factor with the
// given scope (last fastest).
inline std::vector<double> oracle_joint_over(const BayesNet& net, const Evidence& ev,
                                             const std::vector<NodeId>& scope) {
  Assignments as{net.cards()};
  auto joint = oracle_joint(net, ev);
  std::size_t size = 1;
  for (NodeId v : scope) size *= net.variable(v).cardinality();
  std::vector<double> out(size, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i] == 0.0) continue;
    auto a = as.decode(i);
    std::size_t idx = 0;
    for (NodeId v : scope) idx = idx * net.variable(v).cardinality() + a[v];
    out[idx] += joint[i];
    total += joint[i];
  }
  for (double& x : out) x /= total;
  return out;
}

// Random DAG on n nodes: edges only from lower to higher index, then the
// node labels are shuffled so that index order is not topological.
inline riskgraph::Dag random_dag(std::mt19937_64& rng, std::size_t n, double p) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.emplace_back(perm[i], perm[j]);
    }
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("V" + std::to_string(i));
  return riskgraph::Dag(names, edges);
}

// Random CPTs over a DAG; rows drawn from a flat Dirichlet, kept away from 0.
inline BayesNet random_net(std::mt19937_64& rng, const riskgraph::Dag& dag,
                           std::size_t max_card = 3) {
  std::uniform_int_distribution<std::size_t> card_dist(2, max_card);
  std::exponential_distribution<double> expo(1.0);
  riskgraph::NetworkDocument doc;
  std::vector<std::size_t> cards;
  for (NodeId v = 0; v < dag.size(); ++v) {
    cards.push_back(card_dist(rng));
    riskgraph::Variable var{dag.name(v), {}};
    for (std::size_t s = 0; s < cards[v]; ++s) var.states.push_back("s" + std::to_string(s));
    doc.variables.push_back(var);
  }
  for (auto [a, b] : dag.edges()) doc.edges.emplace_back(dag.name(a), dag.name(b));
  for (NodeId v = 0; v < dag.size(); ++v) {
    riskgraph::CptSpec spec{dag.name(v), {}, {}};
    std::size_t rows = 1;
    for (NodeId p : dag.parents(v)) {
      spec.parents.push_back(dag.name(p));
      rows *= cards[p];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> row(cards[v]);
      double s = 0.0;
      for (double& x : row) {
        x = 0.05 + expo(rng);
        s += x;
      }
      for (double& x : row) x /= s;
      spec.rows.push_back(row);
    }
    doc.cpts.push_back(spec);
  }
  return BayesNet::from_document(doc);
}

// Random evidence: each variable hard-observed, soft-observed or left free.
inline Evidence random_evidence(std::mt19937_64& rng, const BayesNet& net, double p_hard = 0.2,
                                double p_soft = 0.15) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Evidence ev;
  for (NodeId v = 0; v < net.size(); ++v) {
    const double r = u(rng);
    const std::size_t c = net.variable(v).cardinality();
    if (r < p_hard) {
      ev.set_hard(v, std::uniform_int_distribution<std::size_t>(0, c - 1)(rng));
    } else if (r < p_hard + p_soft) {
      std::vector<double> lik(c);
      for (double& x : lik) x = 0.05 + u(rng);
      ev.set_soft(v, lik);
    }
  }
  return ev;
}

inline double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? d : INFINITY;
}

}  // namespace testsupport
