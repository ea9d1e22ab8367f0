#pragma once

#include <cstddef>
#include <vector>

#include "riskgraph/evidence.hpp"
#include "riskgraph/exact.hpp"
#include "riskgraph/factor.hpp"
#include "riskgraph/network.hpp"

namespace riskgraph {

// Bipartite view: one factor per CPT plus one unary factor per observed
// variable.
struct FactorGraph {
  std::vector<std::size_t> cards;
  std::vector<Factor> factors;
  std::vector<std::vector<std::size_t>> var_factors;  // factors touching each variable

  static FactorGraph from_network(const BayesNet& net, const Evidence& ev);
};

struct BpSettings {
  std::size_t max_iters = 200;
  double damping = 0.5;      // in [0, 1); geometric weight of the previous message
  double tolerance = 1e-8;   // max-norm of the message change
  bool parallel = true;      // OpenMP message updates within an iteration

  void validate() const;
};

struct BpResult {
  std::vector<Marginal> marginals;  // one per variable, in id order
  bool converged = false;
  std::size_t iterations = 0;
  double last_change = 0.0;
};

// Synchronous (flooding) sum-product with damping. Every message is
// normalized after each update. Non-convergence is reported in the result.
BpResult loopy_bp(const BayesNet& net, const Evidence& ev, const BpSettings& settings = {});
BpResult loopy_bp(const FactorGraph& graph, const BpSettings& settings = {});

}  // namespace riskgraph
