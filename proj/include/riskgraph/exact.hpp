#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "riskgraph/evidence.hpp"
#include "riskgraph/factor.hpp"
#include "riskgraph/graph.hpp"
#include "riskgraph/network.hpp"

namespace riskgraph {

using EliminationOrder = std::vector<NodeId>;

// Normalized joint over the query variables (scope in ascending id order)
// together with the log probability of the evidence.
struct Posterior {
  Factor joint;
  double log_evidence = 0.0;
};

struct Marginal {
  NodeId var = 0;
  std::vector<double> probs;
};

// Greedy min-fill over an interaction graph, eliminating every node outside
// `exclude`; ties go to the lowest index.
EliminationOrder min_fill_order(const UndirectedGraph& graph, const NodeSet& exclude);
// Same, over the network's moral graph.
EliminationOrder min_fill_order(const BayesNet& net, const NodeSet& exclude);

// Sum-product elimination of `order` from a factor list. Intermediate
// factors are rescaled to unit mass; the log of the removed scale is added to
// log_scale. Throws ZeroMass if a factor loses all mass.
std::vector<Factor> eliminate_factors(std::vector<Factor> factors, const EliminationOrder& order,
                                      double& log_scale);

// Hard evidence on non-query variables is reduced out before elimination;
// soft evidence stays in scope as a likelihood factor. A hard-observed query
// variable comes back as a point mass. Without an order, min-fill picks one.
Posterior eliminate(const BayesNet& net, const NodeSet& query, const Evidence& ev,
                    const std::optional<EliminationOrder>& order = std::nullopt);

struct CliqueEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  NodeSet sepset;
};

struct CliqueTree {
  std::vector<NodeSet> cliques;
  std::vector<CliqueEdge> edges;
  // Per network node: the clique holding that node's CPT.
  std::vector<std::size_t> assignment;
  std::vector<Factor> cpt_factors;
  std::vector<std::size_t> cards;

  std::size_t max_clique_size() const;
};

// Moralize, triangulate with min-fill, keep maximal elimination cliques,
// connect them by a maximum-weight spanning tree on sepset sizes.
CliqueTree build_junction_tree(const BayesNet& net);

// Human-readable descriptions of broken invariants (empty when sound):
// spanning tree, sepsets equal intersections, running intersection, family
// covering and CPT assignment.
std::vector<std::string> check_clique_tree(const CliqueTree& tree, const Dag& dag);

struct CalibratedTree {
  const CliqueTree* tree = nullptr;
  std::vector<Factor> clique_beliefs;  // each normalized
  std::vector<Factor> sepset_beliefs;  // indexed like tree->edges
  double log_normalizer = 0.0;         // log P(evidence)
};

// Hugin propagation: one inward pass to clique 0, one outward pass, with
// sepset division (0/0 = 0). Throws ZeroMass on impossible evidence.
CalibratedTree calibrate(const CliqueTree& tree, const Evidence& ev);

// Largest |difference| between neighbouring cliques' sepset marginals.
double calibration_gap(const CalibratedTree& cal);

std::vector<Marginal> query_marginals(const CalibratedTree& cal, const std::vector<NodeId>& vars);

// Normalized joint over vars, which must lie inside a single clique.
Factor clique_marginal(const CalibratedTree& cal, const NodeSet& vars);

// ci_gap_numeric under the enumeration cap; above it, the same measure on
// the joint over x, y and z computed by elimination.
double ci_gap_exact(const BayesNet& net, const CiStatement& s,
                    std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace riskgraph
