#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskgraph/evidence.hpp"
#include "riskgraph/exact.hpp"
#include "riskgraph/factor.hpp"
#include "riskgraph/network.hpp"

namespace riskgraph {

// Plate-structured temporal model.
//
// The first-slice network holds the static nodes (outside the plate) and one
// copy of the slice template (unsuffixed names). Slice variables with a lag-1
// parent get a transition CPT used from the second slice on; in it the lagged
// parent `X` is written `X@prev`. Everything else is time-homogeneous.
//
// Ids: nodes of the first-slice network keep their ids; the previous-slice
// copy of slice node u is addressed as size() + u.
class DynamicNet {
 public:
  struct TransitionSpec {
    std::string child;
    std::vector<std::string> parents;  // names, lagged ones suffixed "@prev"
    std::vector<std::vector<double>> rows;
  };

  DynamicNet() = default;
  DynamicNet(BayesNet first_slice, const std::vector<std::string>& slice_names,
             const std::vector<std::pair<std::string, std::string>>& inter_slice,
             const std::vector<TransitionSpec>& transitions);

  const BayesNet& first_slice() const noexcept { return first_; }
  std::size_t size() const noexcept { return first_.size(); }
  const NodeSet& static_nodes() const noexcept { return static_; }
  const NodeSet& slice_nodes() const noexcept { return slice_; }
  const std::vector<std::pair<NodeId, NodeId>>& inter_slice() const noexcept { return inter_; }
  bool is_slice(NodeId v) const;
  bool has_transition(NodeId v) const { return transition_.count(v) > 0; }
  const Cpt& transition(NodeId v) const { return transition_.at(v); }

  // Static nodes plus slice nodes with an outgoing lag-1 edge.
  const NodeSet& carried_nodes() const noexcept { return carried_; }
  NodeSet carried_slice_nodes() const;
  NodeId lagged(NodeId u) const { return size() + u; }

  // CPT factors for slice t (1-based) in the id scheme above.
  std::vector<Factor> slice_factors(std::size_t t) const;
  std::size_t card(NodeId id) const;

  std::string slice_name(NodeId u, std::size_t t) const;

  const nlohmann::json& meta() const noexcept { return first_.meta(); }

 private:
  BayesNet first_;
  NodeSet static_;
  NodeSet slice_;
  NodeSet carried_;
  std::vector<std::pair<NodeId, NodeId>> inter_;
  std::map<NodeId, Cpt> transition_;
};

// Static nodes once, slice nodes suffixed _1.._T. Throws CycleDetected if the
// lag structure makes the unrolled graph cyclic.
BayesNet unroll(const DynamicNet& dnet, std::size_t slices);

struct FilterState {
  std::size_t t = 0;
  // Normalized joint over the carried variables: static ids, and lagged ids
  // (size() + u) for carried slice nodes of slice t.
  Factor belief;
  double log_evidence = 0.0;
  std::uint64_t last_step_ops = 0;  // factor entries touched by the last step
};

FilterState initial_state(const DynamicNet& dnet);

// Evidence is keyed by first-slice ids. Slice items observe slice t + 1;
// items on static nodes are applied once, at this step.
FilterState filter_step(const DynamicNet& dnet, const FilterState& state, const Evidence& ev);

// Marginal of slice node `target` at slice t + horizon.
std::vector<double> predict(const DynamicNet& dnet, const FilterState& state, std::size_t horizon,
                            NodeId target);

struct StreamRecord {
  std::size_t t = 0;  // 1-based, strictly increasing
  Evidence evidence;
};

struct FilterTick {
  FilterState state;
  std::vector<Marginal> prediction;  // one-step-ahead, per slice node
};

// Ticks skipped by the stream are advanced with empty evidence. ZeroMass
// errors carry the offending tick as locus.
std::vector<FilterTick> filter_run(const DynamicNet& dnet, const std::vector<StreamRecord>& stream);

// One-step-ahead marginals for every slice node.
std::vector<Marginal> predict_slice(const DynamicNet& dnet, const FilterState& state);

// The stream's evidence placed on an unrolled network.
Evidence unrolled_evidence(const DynamicNet& dnet, const BayesNet& unrolled,
                           const std::vector<StreamRecord>& stream);
// Carried variables of slice T inside unroll(dnet, T), as unrolled ids.
NodeSet unrolled_carried(const DynamicNet& dnet, const BayesNet& unrolled, std::size_t slices);
// Unrolled id corresponding to a FilterState belief variable at slice t.
NodeId unrolled_id(const DynamicNet& dnet, const BayesNet& unrolled, NodeId belief_var,
                   std::size_t t);

// Document form: a network document for the first slice plus
//   "dynamic": {"slice": [...], "inter_slice": [[from, to], ...],
//               "transition_cpts": [{"child", "parents", "rows"}]}
DynamicNet parse_dynamic_document(const nlohmann::json& j);
DynamicNet load_dynamic(const std::string& text);
std::string save_dynamic(const DynamicNet& dnet);
bool is_dynamic_document(const nlohmann::json& j);

// NDJSON evidence stream: one {"t": int, "evidence": {...}} per line.
std::vector<StreamRecord> parse_stream(const DynamicNet& dnet, const std::string& text);
StreamRecord parse_stream_record(const DynamicNet& dnet, const nlohmann::json& j);

}  // namespace riskgraph
