#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskgraph/evidence.hpp"
#include "riskgraph/factor.hpp"
#include "riskgraph/graph.hpp"

namespace riskgraph {

// Unvalidated network as written in a document: names instead of ids.
struct CptSpec {
  std::string child;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> rows;
};

struct NetworkDocument {
  std::vector<Variable> variables;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<CptSpec> cpts;
  nlohmann::json meta = nlohmann::json::object();
};

struct Violation {
  std::string kind;  // Cycle, CptShape, RowSum, NameCollision, ParentMismatch, ...
  std::string node;
  std::ptrdiff_t row = -1;
  std::string message;
};

// Loaded rows sum to one within kRowSumTolerance. Rows off by more than
// rounding slack are silently renormalized when within
// kRowRenormalizeTolerance and rejected beyond it.
inline constexpr double kRowSumTolerance = 1e-9;
inline constexpr double kRowRoundingSlack = 1e-12;
inline constexpr double kRowRenormalizeTolerance = 1e-6;

// Empty result means the document describes a valid network.
std::vector<Violation> validate(const NetworkDocument& doc);

class BayesNet {
 public:
  BayesNet() = default;
  // Validates and renormalizes; throws InvalidNetwork carrying the first
  // violation (all violations are available through validate()).
  static BayesNet from_document(const NetworkDocument& doc);

  NetworkDocument to_document() const;

  const Dag& dag() const noexcept { return dag_; }
  std::size_t size() const noexcept { return variables_.size(); }
  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const Variable& variable(NodeId v) const { return variables_.at(v); }
  const std::vector<Cpt>& cpts() const noexcept { return cpts_; }
  const Cpt& cpt(NodeId v) const { return cpts_.at(v); }
  std::vector<std::size_t> cards() const;
  const nlohmann::json& meta() const noexcept { return meta_; }

  NodeId index_of(const std::string& name) const { return dag_.index_of(name); }
  NodeSet resolve(const std::vector<std::string>& names) const;

  // Total number of joint states, saturating at UINT64_MAX.
  std::uint64_t state_space() const;

  std::vector<Factor> factors() const;

 private:
  Dag dag_;
  std::vector<Variable> variables_;
  std::vector<Cpt> cpts_;
  nlohmann::json meta_ = nlohmann::json::object();
};

struct CiStatement {
  NodeSet x;
  NodeSet y;
  NodeSet z;
  bool expected = true;  // true: x independent of y given z
};

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 22;

// Unnormalized joint over all variables (scope 0..n-1) times evidence
// likelihoods. Throws StateSpaceTooLarge above the cap.
Factor joint_enumerate(const BayesNet& net, const Evidence& ev,
                       std::uint64_t cap = kDefaultEnumerationCap);

// Largest |P(x | y, z) - P(x | z)| over configurations with positive
// conditioning mass, given a joint factor whose scope covers x, y and z.
double ci_gap(const Factor& joint, const NodeSet& x, const NodeSet& y, const NodeSet& z);

// Empty x or y is vacuously independent.
bool check_ci_numeric(const BayesNet& net, const CiStatement& s, double tol,
                      std::uint64_t cap = kDefaultEnumerationCap);
double ci_gap_numeric(const BayesNet& net, const CiStatement& s,
                      std::uint64_t cap = kDefaultEnumerationCap);

namespace kernels {
void enumerate_serial(const BayesNet& net, const Evidence& ev, Factor& out);
void enumerate_parallel(const BayesNet& net, const Evidence& ev, Factor& out);
}  // namespace kernels

// Parses "K=1" style assignments and "S=0.3,0.7" likelihoods against a
// network's variable and state names.
Evidence parse_evidence(const BayesNet& net, const std::vector<std::string>& hard,
                        const std::vector<std::string>& soft);

}  // namespace riskgraph
