#pragma once

#include <cstddef>
#include <map>
#include <variant>
#include <vector>

#include "riskgraph/graph.hpp"

namespace riskgraph {

struct HardEvidence {
  std::size_t state;
  bool operator==(const HardEvidence&) const = default;
};

// Likelihood (virtual) evidence: entries multiply the matching states.
struct SoftEvidence {
  std::vector<double> likelihood;
  bool operator==(const SoftEvidence&) const = default;
};

using EvidenceItem = std::variant<HardEvidence, SoftEvidence>;

// Observations keyed by node id. A variable carries at most one item; setting
// a second one on the same variable is rejected as ConflictingEvidence.
class Evidence {
 public:
  Evidence() = default;

  Evidence& set_hard(NodeId v, std::size_t state);
  Evidence& set_soft(NodeId v, std::vector<double> likelihood);
  Evidence& set(NodeId v, EvidenceItem item);

  bool empty() const noexcept { return items_.empty(); }
  std::size_t size() const noexcept { return items_.size(); }
  bool contains(NodeId v) const { return items_.count(v) > 0; }
  const EvidenceItem* find(NodeId v) const;
  const std::map<NodeId, EvidenceItem>& items() const noexcept { return items_; }

  // Nodes carrying hard evidence, sorted.
  NodeSet hard_nodes() const;

  // Checks states against cardinalities and soft vectors for being
  // non-negative, finite, not all zero and of the right length.
  void validate(const std::vector<std::size_t>& cards) const;

  // Union of two evidence sets; a variable present in both is a conflict.
  Evidence merged(const Evidence& other) const;

  bool operator==(const Evidence&) const = default;

 private:
  std::map<NodeId, EvidenceItem> items_;
};

}  // namespace riskgraph
