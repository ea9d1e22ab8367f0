#include "riskgraph/evidence.hpp"

#include <cmath>
#include <string>

#include "riskgraph/error.hpp"

namespace riskgraph {

Evidence& Evidence::set_hard(NodeId v, std::size_t state) { return set(v, HardEvidence{state}); }

Evidence& Evidence::set_soft(NodeId v, std::vector<double> likelihood) {
  return set(v, SoftEvidence{std::move(likelihood)});
}

Evidence& Evidence::set(NodeId v, EvidenceItem item) {
  if (!items_.emplace(v, std::move(item)).second) {
    throw Error(errc::kConflictingEvidence, "variable already carries evidence",
                std::to_string(v));
  }
  return *this;
}

const EvidenceItem* Evidence::find(NodeId v) const {
  auto it = items_.find(v);
  return it == items_.end() ? nullptr : &it->second;
}

NodeSet Evidence::hard_nodes() const {
  NodeSet out;
  for (const auto& [v, item] : items_) {
    if (std::holds_alternative<HardEvidence>(item)) out.push_back(v);
  }
  return out;
}

void Evidence::validate(const std::vector<std::size_t>& cards) const {
  for (const auto& [v, item] : items_) {
    const std::string locus = std::to_string(v);
    if (v >= cards.size()) throw Error(errc::kInvalidNode, "evidence on unknown node", locus);
    if (const auto* hard = std::get_if<HardEvidence>(&item)) {
      if (hard->state >= cards[v]) {
        throw Error(errc::kStateOutOfRange, "evidence state out of range", locus);
      }
      continue;
    }
    const auto& lik = std::get<SoftEvidence>(item).likelihood;
    if (lik.size() != cards[v]) {
      throw Error(errc::kStateOutOfRange, "likelihood length differs from cardinality", locus);
    }
    bool any_positive = false;
    for (double x : lik) {
      if (!std::isfinite(x) || x < 0.0) {
        throw Error(errc::kInvalidArgument, "likelihood entries must be finite and >= 0", locus);
      }
      any_positive = any_positive || x > 0.0;
    }
    if (!any_positive) throw Error(errc::kInvalidArgument, "likelihood is all zero", locus);
  }
}

Evidence Evidence::merged(const Evidence& other) const {
  Evidence out = *this;
  for (const auto& [v, item] : other.items_) out.set(v, item);
  return out;
}

}  // namespace riskgraph
