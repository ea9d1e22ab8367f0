#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riskgraph/evidence.hpp"
#include "riskgraph/graph.hpp"

namespace riskgraph {

struct Variable {
  std::string name;
  std::vector<std::string> states;

  std::size_t cardinality() const noexcept { return states.size(); }
  // Index of a state label, or throws StateOutOfRange.
  std::size_t state_index(const std::string& label) const;
  bool operator==(const Variable&) const = default;
};

// Dense non-negative table over an ordered scope; row-major with the last
// scope variable varying fastest.
class Factor {
 public:
  Factor() : values_{1.0} {}  // scalar one
  Factor(std::vector<NodeId> scope, std::vector<std::size_t> cards, std::vector<double> values);
  Factor(std::vector<NodeId> scope, std::vector<std::size_t> cards, double fill);

  static Factor scalar(double value);

  const std::vector<NodeId>& scope() const noexcept { return scope_; }
  const std::vector<std::size_t>& cards() const noexcept { return cards_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& mutable_values() noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  bool in_scope(NodeId v) const;
  std::size_t position(NodeId v) const;  // throws VariableNotInScope
  std::size_t card_of(NodeId v) const { return cards_[position(v)]; }

  // Entry for an assignment given in scope order.
  double at(std::span<const std::size_t> assignment) const;
  double total() const;

 private:
  std::vector<NodeId> scope_;
  std::vector<std::size_t> cards_;
  std::vector<double> values_;
};

// Conditional probability table; probs has the layout of the factor over
// parents ++ [child]: one row per parent configuration (last parent fastest),
// each row a distribution over child states.
struct Cpt {
  NodeId child = 0;
  std::vector<NodeId> parents;
  std::vector<std::size_t> parent_cards;
  std::size_t child_card = 0;
  std::vector<double> probs;

  std::size_t row_count() const noexcept;
  std::span<const double> row(std::size_t r) const;
  bool operator==(const Cpt&) const = default;
};

Factor factor_from_cpt(const Cpt& cpt);

// Scope of the result is a's order followed by b's variables not in a.
// Throws CardinalityMismatch when shared variables disagree.
Factor product(const Factor& a, const Factor& b);
Factor product(std::span<const Factor> factors);

// Sums out every variable of `out`. Throws VariableNotInScope.
Factor marginalize(const Factor& f, const NodeSet& out);
// Sums out everything except `keep` (variables of keep absent from the scope
// are ignored); the result keeps f's relative scope order.
Factor marginalize_to(const Factor& f, const NodeSet& keep);

// Hard evidence selects a slice and drops the variable; soft evidence
// multiplies by the likelihood and keeps it. Items for variables outside the
// scope are ignored.
Factor reduce(const Factor& f, const Evidence& ev);

// Like reduce, but hard evidence zeroes incompatible entries and keeps the
// variable in scope.
Factor apply_evidence(const Factor& f, const Evidence& ev);

struct Normalized {
  Factor factor;
  double constant;
};

// Throws ZeroMass when the total is not positive.
Normalized normalize(const Factor& f);

// Pointwise a / b where b's scope is a subset of a's; 0/0 is 0.
Factor divide(const Factor& a, const Factor& b);

// Reorders a factor to the given scope (a permutation of its scope).
Factor permute(const Factor& f, const std::vector<NodeId>& scope);

// Max absolute difference between two factors over the same variable set.
double max_abs_diff(const Factor& a, const Factor& b);

// Number of table entries touched by product/marginalize on this thread.
std::uint64_t& factor_op_counter();

namespace kernels {

// Reference implementations: one linear pass, no threading.
void product_serial(const Factor& a, const Factor& b, Factor& out);
void marginalize_serial(const Factor& f, const std::vector<bool>& keep_mask, Factor& out);

// OpenMP implementations, bit-identical to the serial versions: every output
// entry accumulates its inputs in the same order as the serial pass.
void product_parallel(const Factor& a, const Factor& b, Factor& out);
void marginalize_parallel(const Factor& f, const std::vector<bool>& keep_mask, Factor& out);

// Tables at least this large use the parallel kernels.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

}  // namespace kernels

}  // namespace riskgraph
