#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "riskgraph/factor.hpp"
#include "riskgraph/graph.hpp"
#include "riskgraph/network.hpp"

namespace riskgraph {

inline constexpr std::size_t kMissing = std::numeric_limits<std::size_t>::max();

// Rows of state indices, one column per variable; kMissing marks "?".
struct Dataset {
  std::vector<Variable> variables;
  std::vector<std::vector<std::size_t>> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool complete() const;
  std::optional<std::size_t> column(const std::string& name) const;
  std::vector<std::size_t> cards() const;
};

// CSV with a header row of variable names and state labels per cell.
// With a schema, labels must be known states of the named variables (columns
// may be a subset of the schema). Without one, each column's states are its
// distinct labels in sorted order.
Dataset parse_dataset(const std::string& text, const std::vector<Variable>& schema);
Dataset parse_dataset(const std::string& text);
std::string write_dataset(const Dataset& data);

// Ancestral sampling; deterministic for a given seed on every platform.
Dataset forward_sample(const BayesNet& net, std::size_t n, std::uint64_t seed);
// The same data without the named columns.
Dataset drop_columns(const Dataset& data, const std::vector<std::string>& names);

struct DirichletPrior {
  double alpha = 1.0;  // equivalent sample size, spread evenly over a row
};

// Rows are (counts + alpha/k) / (total + alpha) with k the child's
// cardinality; without a prior, unseen parent configurations get a uniform
// row. Parent order follows the DAG.
BayesNet fit_mle(const Dag& dag, const std::vector<Variable>& variables, const Dataset& data,
                 const std::optional<DirichletPrior>& prior = std::nullopt);

struct EmSettings {
  enum class Init { Random, Uniform };
  Init init = Init::Random;
  std::uint64_t seed = 0;
  std::size_t max_iters = 200;
  double tol = 1e-8;    // stop once the log-likelihood gain falls below this
  bool parallel = true;  // OpenMP E-step; the reduction order is fixed either way
};

struct EmResult {
  BayesNet net;
  std::vector<double> trace;  // log-likelihood of the initialization, then per iteration
  std::size_t iterations = 0;
  bool converged = false;
};

// Variables of `variables` absent from the data are latent. Observed columns
// may contain missing values.
EmResult fit_em(const Dag& dag, const std::vector<Variable>& variables, const Dataset& data,
                const EmSettings& settings = {});

// Log-likelihood of complete data under a network.
double log_likelihood(const BayesNet& net, const Dataset& data);
std::size_t free_parameters(const BayesNet& net);
double score_bic(const BayesNet& net, const Dataset& data);

// BIC contribution of one family at its maximum-likelihood parameters, with
// dataset columns as node ids.
double family_bic(const Dataset& data, NodeId child, const std::vector<NodeId>& parents);
// Sum of family_bic over a DAG whose node i is column i.
double structure_bic(const Dataset& data, const Dag& dag);

struct StructureSearchSettings {
  std::size_t max_iters = 1000;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
  std::size_t perturbation_moves = 4;
  std::vector<std::pair<NodeId, NodeId>> whitelist;  // edges forced in
  std::vector<std::pair<NodeId, NodeId>> blacklist;  // edges never added
};

struct HillClimbResult {
  Dag dag;
  double score = 0.0;
  std::vector<double> trace;            // winning restart: start score then each accepted move
  std::vector<double> restart_scores;   // final score per restart
};

HillClimbResult hill_climb(const Dataset& data, const StructureSearchSettings& settings = {});

struct CiTestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Likelihood-ratio test of x independent of y given z (dataset columns).
// Degrees of freedom count only non-empty margins in each observed stratum.
// Throws InsufficientData when an observed stratum has fewer than
// kMinStratumRows rows (with empty z, the whole data set is the stratum).
inline constexpr std::size_t kMinStratumRows = 5;
CiTestResult ci_test_g2(const Dataset& data, NodeId x, NodeId y, const NodeSet& z);

struct PcResult {
  UndirectedGraph skeleton;
  std::map<std::pair<NodeId, NodeId>, NodeSet> separating_sets;  // keyed (low, high)
  std::vector<std::pair<NodeId, NodeId>> oriented;               // collider arms, parent -> child
  std::vector<std::string> warnings;
};

// Order-independent (stable) skeleton search followed by collider
// orientation. Tests that fail for lack of data keep the edge and add a
// warning.
PcResult pc_skeleton(const Dataset& data, double alpha);

}  // namespace riskgraph
