#include "riskgraph/factor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "riskgraph/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace riskgraph {

namespace {

std::size_t table_size(const std::vector<std::size_t>& cards) {
  std::size_t n = 1;
  for (std::size_t c : cards) n *= c;
  return n;
}

// Row-major strides, last variable fastest.
std::vector<std::size_t> strides_of(const std::vector<std::size_t>& cards) {
  std::vector<std::size_t> s(cards.size(), 1);
  for (std::size_t k = cards.size(); k-- > 1;) s[k - 1] = s[k] * cards[k];
  return s;
}

// Stride of each `target` variable inside `source`'s layout, 0 if absent.
std::vector<std::size_t> aligned_strides(const Factor& source,
                                         const std::vector<NodeId>& target) {
  const auto src = strides_of(source.cards());
  std::vector<std::size_t> out(target.size(), 0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto& sc = source.scope();
    auto it = std::find(sc.begin(), sc.end(), target[k]);
    if (it != sc.end()) out[k] = src[static_cast<std::size_t>(it - sc.begin())];
  }
  return out;
}

void decode(std::size_t index, const std::vector<std::size_t>& cards,
            std::vector<std::size_t>& assignment) {
  for (std::size_t k = cards.size(); k-- > 0;) {
    assignment[k] = index % cards[k];
    index /= cards[k];
  }
}

// Advances an odometer; updates the linear offsets of up to two aligned tables.
inline void advance(std::vector<std::size_t>& assignment, const std::vector<std::size_t>& cards,
                    const std::vector<std::size_t>& sa, std::size_t& ia,
                    const std::vector<std::size_t>& sb, std::size_t& ib) {
  for (std::size_t k = cards.size(); k-- > 0;) {
    if (++assignment[k] < cards[k]) {
      ia += sa[k];
      ib += sb[k];
      return;
    }
    ia -= sa[k] * (cards[k] - 1);
    ib -= sb[k] * (cards[k] - 1);
    assignment[k] = 0;
  }
}

struct ProductLayout {
  std::vector<NodeId> scope;
  std::vector<std::size_t> cards;
};

ProductLayout product_layout(const Factor& a, const Factor& b) {
  ProductLayout l{a.scope(), a.cards()};
  for (std::size_t k = 0; k < b.scope().size(); ++k) {
    NodeId v = b.scope()[k];
    auto it = std::find(l.scope.begin(), l.scope.end(), v);
    if (it == l.scope.end()) {
      l.scope.push_back(v);
      l.cards.push_back(b.cards()[k]);
    } else if (l.cards[static_cast<std::size_t>(it - l.scope.begin())] != b.cards()[k]) {
      throw Error(errc::kCardinalityMismatch, "shared variable with different cardinality",
                  std::to_string(v));
    }
  }
  return l;
}

void product_range(const Factor& a, const Factor& b, Factor& out, std::size_t begin,
                   std::size_t end) {
  if (begin >= end) return;
  const auto& cards = out.cards();
  const auto sa = aligned_strides(a, out.scope());
  const auto sb = aligned_strides(b, out.scope());
  std::vector<std::size_t> assignment(cards.size(), 0);
  decode(begin, cards, assignment);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t k = 0; k < cards.size(); ++k) {
    ia += assignment[k] * sa[k];
    ib += assignment[k] * sb[k];
  }
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.mutable_values().data();
  for (std::size_t i = begin; i < end; ++i) {
    ov[i] = av[ia] * bv[ib];
    advance(assignment, cards, sa, ia, sb, ib);
  }
}

struct MarginalLayout {
  std::vector<NodeId> scope;
  std::vector<std::size_t> cards;
};

MarginalLayout marginal_layout(const Factor& f, const std::vector<bool>& keep) {
  MarginalLayout l;
  for (std::size_t k = 0; k < f.scope().size(); ++k) {
    if (keep[k]) {
      l.scope.push_back(f.scope()[k]);
      l.cards.push_back(f.cards()[k]);
    }
  }
  return l;
}

bool use_parallel(std::size_t n) {
#ifdef _OPENMP
  return n >= kernels::kParallelThreshold;
#else
  (void)n;
  return false;
#endif
}

}  // namespace

std::size_t Variable::state_index(const std::string& label) const {
  auto it = std::find(states.begin(), states.end(), label);
  if (it == states.end()) throw Error(errc::kStateOutOfRange, "unknown state '" + label + "'", name);
  return static_cast<std::size_t>(it - states.begin());
}

Factor::Factor(std::vector<NodeId> scope, std::vector<std::size_t> cards,
               std::vector<double> values)
    : scope_(std::move(scope)), cards_(std::move(cards)), values_(std::move(values)) {
  if (scope_.size() != cards_.size()) {
    throw Error(errc::kInvalidArgument, "scope and cardinality lists differ in length");
  }
  if (values_.size() != table_size(cards_)) {
    throw Error(errc::kInvalidArgument, "factor table has the wrong number of entries");
  }
}

Factor::Factor(std::vector<NodeId> scope, std::vector<std::size_t> cards, double fill)
    : scope_(std::move(scope)), cards_(std::move(cards)) {
  if (scope_.size() != cards_.size()) {
    throw Error(errc::kInvalidArgument, "scope and cardinality lists differ in length");
  }
  values_.assign(table_size(cards_), fill);
}

Factor Factor::scalar(double value) { return Factor({}, {}, std::vector<double>{value}); }

bool Factor::in_scope(NodeId v) const {
  return std::find(scope_.begin(), scope_.end(), v) != scope_.end();
}

std::size_t Factor::position(NodeId v) const {
  auto it = std::find(scope_.begin(), scope_.end(), v);
  if (it == scope_.end()) {
    throw Error(errc::kVariableNotInScope, "variable not in factor scope", std::to_string(v));
  }
  return static_cast<std::size_t>(it - scope_.begin());
}

double Factor::at(std::span<const std::size_t> assignment) const {
  std::size_t index = 0;
  for (std::size_t k = 0; k < cards_.size(); ++k) index = index * cards_[k] + assignment[k];
  return values_.at(index);
}

double Factor::total() const {
  double s = 0.0;
  for (double x : values_) s += x;
  return s;
}

std::size_t Cpt::row_count() const noexcept { return table_size(parent_cards); }

std::span<const double> Cpt::row(std::size_t r) const {
  return std::span<const double>(probs).subspan(r * child_card, child_card);
}

Factor factor_from_cpt(const Cpt& cpt) {
  std::vector<NodeId> scope = cpt.parents;
  scope.push_back(cpt.child);
  std::vector<std::size_t> cards = cpt.parent_cards;
  cards.push_back(cpt.child_card);
  return Factor(std::move(scope), std::move(cards), cpt.probs);
}

std::uint64_t& factor_op_counter() {
  thread_local std::uint64_t counter = 0;
  return counter;
}

namespace kernels {

void product_serial(const Factor& a, const Factor& b, Factor& out) {
  product_range(a, b, out, 0, out.size());
}

void product_parallel(const Factor& a, const Factor& b, Factor& out) {
  const std::size_t n = out.size();
#pragma omp parallel
  {
#ifdef _OPENMP
    const std::size_t threads = static_cast<std::size_t>(omp_get_num_threads());
    const std::size_t tid = static_cast<std::size_t>(omp_get_thread_num());
#else
    const std::size_t threads = 1;
    const std::size_t tid = 0;
#endif
    const std::size_t chunk = (n + threads - 1) / threads;
    product_range(a, b, out, std::min(n, tid * chunk), std::min(n, (tid + 1) * chunk));
  }
}

void marginalize_serial(const Factor& f, const std::vector<bool>& keep_mask, Factor& out) {
  auto& ov = out.mutable_values();
  std::fill(ov.begin(), ov.end(), 0.0);
  const auto& cards = f.cards();
  const auto so = aligned_strides(out, f.scope());
  const std::vector<std::size_t> zero(cards.size(), 0);
  std::vector<std::size_t> assignment(cards.size(), 0);
  std::size_t io = 0;
  std::size_t unused = 0;
  const double* fv = f.values().data();
  for (std::size_t i = 0; i < f.size(); ++i) {
    ov[io] += fv[i];
    advance(assignment, cards, so, io, zero, unused);
  }
  (void)keep_mask;
}

void marginalize_parallel(const Factor& f, const std::vector<bool>& keep_mask, Factor& out) {
  const auto in_strides = strides_of(f.cards());
  std::vector<std::size_t> kept_strides;
  std::vector<std::size_t> elim_cards;
  std::vector<std::size_t> elim_strides;
  for (std::size_t k = 0; k < f.scope().size(); ++k) {
    if (keep_mask[k]) {
      kept_strides.push_back(in_strides[k]);
    } else {
      elim_cards.push_back(f.cards()[k]);
      elim_strides.push_back(in_strides[k]);
    }
  }
  const std::vector<std::size_t> zero(elim_cards.size(), 0);
  const auto& out_cards = out.cards();
  const double* fv = f.values().data();
  double* ov = out.mutable_values().data();
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < n; ++o) {
    std::vector<std::size_t> kept(out_cards.size());
    decode(static_cast<std::size_t>(o), out_cards, kept);
    std::size_t base = 0;
    for (std::size_t k = 0; k < kept.size(); ++k) base += kept[k] * kept_strides[k];
    // Eliminated assignments in lexicographic order visit inputs in increasing
    // index order, matching the serial accumulation order.
    std::vector<std::size_t> elim(elim_cards.size(), 0);
    std::size_t offset = 0;
    std::size_t unused = 0;
    double sum = 0.0;
    std::size_t count = 1;
    for (std::size_t c : elim_cards) count *= c;
    for (std::size_t j = 0; j < count; ++j) {
      sum += fv[base + offset];
      advance(elim, elim_cards, elim_strides, offset, zero, unused);
    }
    ov[o] = sum;
  }
}

}  // namespace kernels

Factor product(const Factor& a, const Factor& b) {
  auto layout = product_layout(a, b);
  Factor out(std::move(layout.scope), std::move(layout.cards), 0.0);
  factor_op_counter() += out.size();
  if (use_parallel(out.size())) {
    kernels::product_parallel(a, b, out);
  } else {
    kernels::product_serial(a, b, out);
  }
  return out;
}

Factor product(std::span<const Factor> factors) {
  Factor out = Factor::scalar(1.0);
  for (const auto& f : factors) out = product(out, f);
  return out;
}

Factor marginalize(const Factor& f, const NodeSet& out_vars) {
  std::vector<bool> keep(f.scope().size(), true);
  for (NodeId v : out_vars) keep[f.position(v)] = false;
  auto layout = marginal_layout(f, keep);
  Factor out(std::move(layout.scope), std::move(layout.cards), 0.0);
  factor_op_counter() += f.size();
  if (use_parallel(f.size())) {
    kernels::marginalize_parallel(f, keep, out);
  } else {
    kernels::marginalize_serial(f, keep, out);
  }
  return out;
}

Factor marginalize_to(const Factor& f, const NodeSet& keep) {
  NodeSet out;
  for (NodeId v : f.scope()) {
    if (!std::binary_search(keep.begin(), keep.end(), v)) out.push_back(v);
  }
  if (out.empty()) return f;
  return marginalize(f, out);
}

namespace {

// Multiplies soft likelihoods (and, when zero_hard, hard indicators) in place.
void weight_in_place(Factor& f, const Evidence& ev, bool zero_hard) {
  const auto strides = strides_of(f.cards());
  auto& vals = f.mutable_values();
  for (std::size_t k = 0; k < f.scope().size(); ++k) {
    const EvidenceItem* item = ev.find(f.scope()[k]);
    if (item == nullptr) continue;
    const std::size_t card = f.cards()[k];
    std::vector<double> weight(card, 1.0);
    if (const auto* hard = std::get_if<HardEvidence>(item)) {
      if (hard->state >= card) {
        throw Error(errc::kStateOutOfRange, "evidence state out of range",
                    std::to_string(f.scope()[k]));
      }
      if (!zero_hard) continue;
      std::fill(weight.begin(), weight.end(), 0.0);
      weight[hard->state] = 1.0;
    } else {
      const auto& lik = std::get<SoftEvidence>(*item).likelihood;
      if (lik.size() != card) {
        throw Error(errc::kStateOutOfRange, "likelihood length differs from cardinality",
                    std::to_string(f.scope()[k]));
      }
      weight = lik;
    }
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] *= weight[(i / strides[k]) % card];
  }
}

}  // namespace

Factor apply_evidence(const Factor& f, const Evidence& ev) {
  Factor out = f;
  weight_in_place(out, ev, true);
  return out;
}

Factor reduce(const Factor& f, const Evidence& ev) {
  Factor weighted = f;
  weight_in_place(weighted, ev, false);

  std::vector<NodeId> scope;
  std::vector<std::size_t> cards;
  std::vector<std::size_t> kept_strides;
  std::size_t base = 0;
  const auto strides = strides_of(f.cards());
  for (std::size_t k = 0; k < f.scope().size(); ++k) {
    const EvidenceItem* item = ev.find(f.scope()[k]);
    if (item != nullptr && std::holds_alternative<HardEvidence>(*item)) {
      base += std::get<HardEvidence>(*item).state * strides[k];
    } else {
      scope.push_back(f.scope()[k]);
      cards.push_back(f.cards()[k]);
      kept_strides.push_back(strides[k]);
    }
  }
  if (scope.size() == f.scope().size()) return weighted;
  Factor out(std::move(scope), std::move(cards), 0.0);
  std::vector<std::size_t> assignment(out.cards().size(), 0);
  const std::vector<std::size_t> zero(out.cards().size(), 0);
  std::size_t index = base;
  std::size_t unused = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.mutable_values()[i] = weighted.values()[index];
    advance(assignment, out.cards(), kept_strides, index, zero, unused);
  }
  return out;
}

Normalized normalize(const Factor& f) {
  const double z = f.total();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw Error(errc::kZeroMass, "factor has no positive mass (impossible evidence)");
  }
  Factor out = f;
  for (double& x : out.mutable_values()) x /= z;
  return {std::move(out), z};
}

Factor divide(const Factor& a, const Factor& b) {
  for (NodeId v : b.scope()) (void)a.position(v);
  Factor out(a.scope(), a.cards(), 0.0);
  const auto sb = aligned_strides(b, a.scope());
  const std::vector<std::size_t> zero(a.cards().size(), 0);
  std::vector<std::size_t> assignment(a.cards().size(), 0);
  std::size_t ib = 0;
  std::size_t unused = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double den = b.values()[ib];
    out.mutable_values()[i] = den == 0.0 ? 0.0 : a.values()[i] / den;
    advance(assignment, a.cards(), sb, ib, zero, unused);
  }
  return out;
}

Factor permute(const Factor& f, const std::vector<NodeId>& scope) {
  if (scope == f.scope()) return f;
  if (scope.size() != f.scope().size()) {
    throw Error(errc::kVariableNotInScope, "permutation does not cover the scope");
  }
  std::vector<std::size_t> cards;
  for (NodeId v : scope) cards.push_back(f.card_of(v));
  Factor out(scope, std::move(cards), 0.0);
  const auto sf = aligned_strides(f, scope);
  const std::vector<std::size_t> zero(scope.size(), 0);
  std::vector<std::size_t> assignment(scope.size(), 0);
  std::size_t index = 0;
  std::size_t unused = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.mutable_values()[i] = f.values()[index];
    advance(assignment, out.cards(), sf, index, zero, unused);
  }
  return out;
}

double max_abs_diff(const Factor& a, const Factor& b) {
  Factor bb = permute(b, a.scope());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - bb.values()[i]));
  }
  return m;
}

}  // namespace riskgraph
