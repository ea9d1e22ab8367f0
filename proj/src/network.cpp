#include "riskgraph/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "riskgraph/error.hpp"

namespace riskgraph {

namespace {

std::size_t product_of(const std::vector<std::size_t>& xs) {
  std::size_t n = 1;
  for (std::size_t x : xs) n *= x;
  return n;
}

void add(std::vector<Violation>& out, std::string kind, std::string node, std::string message,
         std::ptrdiff_t row = -1) {
  out.push_back({std::move(kind), std::move(node), row, std::move(message)});
}

}  // namespace

std::vector<Violation> validate(const NetworkDocument& doc) {
  std::vector<Violation> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < doc.variables.size(); ++i) {
    const auto& var = doc.variables[i];
    if (var.name.empty()) {
      add(out, "NameCollision", "", "variable " + std::to_string(i) + " has an empty name");
      continue;
    }
    if (!index.emplace(var.name, i).second) {
      add(out, "NameCollision", var.name, "duplicate variable name");
    }
    if (var.states.empty()) add(out, "EmptyStates", var.name, "variable has no states");
    std::set<std::string> seen(var.states.begin(), var.states.end());
    if (seen.size() != var.states.size()) add(out, "NameCollision", var.name, "duplicate state label");
  }

  std::vector<std::vector<std::size_t>> parents(doc.variables.size());
  bool edges_ok = true;
  for (const auto& [from, to] : doc.edges) {
    auto a = index.find(from);
    auto b = index.find(to);
    if (a == index.end() || b == index.end()) {
      add(out, "UnknownVariable", a == index.end() ? from : to, "edge references unknown variable");
      edges_ok = false;
      continue;
    }
    if (a->second == b->second) {
      add(out, "Cycle", from, "self-loop");
      edges_ok = false;
      continue;
    }
    auto& ps = parents[b->second];
    if (std::find(ps.begin(), ps.end(), a->second) != ps.end()) {
      add(out, "DuplicateEdge", to, "duplicate edge " + from + "->" + to);
      continue;
    }
    ps.push_back(a->second);
  }
  if (edges_ok) {
    try {
      topological_order(doc.variables.size(), parents);
    } catch (const Error&) {
      add(out, "Cycle", "", "graph contains a directed cycle");
    }
  }

  std::vector<int> cpt_count(doc.variables.size(), 0);
  for (const auto& cpt : doc.cpts) {
    auto c = index.find(cpt.child);
    if (c == index.end()) {
      add(out, "UnknownVariable", cpt.child, "CPT for unknown variable");
      continue;
    }
    if (++cpt_count[c->second] > 1) {
      add(out, "DuplicateCpt", cpt.child, "more than one CPT for variable");
      continue;
    }
    std::vector<std::size_t> listed;
    std::vector<std::size_t> parent_cards;
    bool parents_ok = true;
    for (const auto& p : cpt.parents) {
      auto it = index.find(p);
      if (it == index.end()) {
        add(out, "ParentMismatch", cpt.child, "CPT lists unknown parent '" + p + "'");
        parents_ok = false;
        continue;
      }
      listed.push_back(it->second);
      parent_cards.push_back(doc.variables[it->second].cardinality());
    }
    if (!parents_ok) continue;
    auto a = listed;
    auto b = parents[c->second];
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b || std::adjacent_find(a.begin(), a.end()) != a.end()) {
      add(out, "ParentMismatch", cpt.child, "CPT parents are not the graph parents");
      continue;
    }
    const std::size_t rows = product_of(parent_cards);
    const std::size_t card = doc.variables[c->second].cardinality();
    if (cpt.rows.size() != rows) {
      add(out, "CptShape", cpt.child,
          "expected " + std::to_string(rows) + " rows, found " + std::to_string(cpt.rows.size()));
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& row = cpt.rows[r];
      const auto ri = static_cast<std::ptrdiff_t>(r);
      if (row.size() != card) {
        add(out, "CptShape", cpt.child, "row has the wrong number of entries", ri);
        continue;
      }
      double sum = 0.0;
      bool finite = true;
      for (double x : row) {
        if (!std::isfinite(x) || x < 0.0) finite = false;
        sum += x;
      }
      if (!finite) {
        add(out, "NegativeProbability", cpt.child, "row has a negative or non-finite entry", ri);
      } else if (std::abs(sum - 1.0) > kRowRenormalizeTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "row sums to " << sum;
        add(out, "RowSum", cpt.child, msg.str(), ri);
      }
    }
  }
  for (std::size_t i = 0; i < doc.variables.size(); ++i) {
    if (cpt_count[i] == 0 && !doc.variables[i].name.empty()) {
      add(out, "MissingCpt", doc.variables[i].name, "variable has no CPT");
    }
  }
  return out;
}

BayesNet BayesNet::from_document(const NetworkDocument& doc) {
  auto violations = validate(doc);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string locus = v.node;
    if (v.row >= 0) locus += "[row " + std::to_string(v.row) + "]";
    throw Error(errc::kInvalidNetwork, v.kind + ": " + v.message, locus);
  }

  BayesNet net;
  net.variables_ = doc.variables;
  std::vector<std::string> names;
  for (const auto& v : doc.variables) names.push_back(v.name);

  // Dag parent order follows each CPT's parent order.
  std::map<std::string, const CptSpec*> by_child;
  for (const auto& c : doc.cpts) by_child[c.child] = &c;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& name : names) {
    for (const auto& p : by_child.at(name)->parents) edges.emplace_back(p, name);
  }
  net.dag_ = Dag::from_named_edges(names, edges);

  for (NodeId v = 0; v < names.size(); ++v) {
    const CptSpec& spec = *by_child.at(names[v]);
    Cpt cpt;
    cpt.child = v;
    cpt.child_card = doc.variables[v].cardinality();
    for (const auto& p : spec.parents) {
      NodeId pid = net.dag_.index_of(p);
      cpt.parents.push_back(pid);
      cpt.parent_cards.push_back(doc.variables[pid].cardinality());
    }
    for (const auto& row : spec.rows) {
      double sum = 0.0;
      for (double x : row) sum += x;
      const bool renormalize = std::abs(sum - 1.0) > kRowRoundingSlack;
      for (double x : row) cpt.probs.push_back(renormalize ? x / sum : x);
    }
    net.cpts_.push_back(std::move(cpt));
  }
  net.meta_ = doc.meta.is_null() ? nlohmann::json::object() : doc.meta;
  return net;
}

NetworkDocument BayesNet::to_document() const {
  NetworkDocument doc;
  const auto& order = dag_.topological_order();
  for (NodeId v : order) doc.variables.push_back(variables_[v]);
  for (NodeId v : order) {
    for (NodeId p : cpts_[v].parents) doc.edges.emplace_back(variables_[p].name, variables_[v].name);
  }
  for (NodeId v : order) {
    const Cpt& cpt = cpts_[v];
    CptSpec spec;
    spec.child = variables_[v].name;
    for (NodeId p : cpt.parents) spec.parents.push_back(variables_[p].name);
    for (std::size_t r = 0; r < cpt.row_count(); ++r) {
      auto row = cpt.row(r);
      spec.rows.emplace_back(row.begin(), row.end());
    }
    doc.cpts.push_back(std::move(spec));
  }
  doc.meta = meta_;
  return doc;
}

std::vector<std::size_t> BayesNet::cards() const {
  std::vector<std::size_t> out;
  out.reserve(variables_.size());
  for (const auto& v : variables_) out.push_back(v.cardinality());
  return out;
}

NodeSet BayesNet::resolve(const std::vector<std::string>& names) const {
  std::vector<NodeId> ids;
  for (const auto& n : names) ids.push_back(index_of(n));
  return make_node_set(std::move(ids));
}

std::uint64_t BayesNet::state_space() const {
  std::uint64_t n = 1;
  for (const auto& v : variables_) {
    const std::uint64_t c = v.cardinality();
    if (c != 0 && n > std::numeric_limits<std::uint64_t>::max() / c) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= c;
  }
  return n;
}

std::vector<Factor> BayesNet::factors() const {
  std::vector<Factor> out;
  out.reserve(cpts_.size());
  for (const auto& c : cpts_) out.push_back(factor_from_cpt(c));
  return out;
}

namespace {

struct EnumerationPlan {
  std::vector<std::size_t> cards;
  // Per node: CPT row strides for each parent, in CPT parent order.
  std::vector<std::vector<std::size_t>> parent_strides;
  // Per node: evidence weight per state (all ones when unobserved).
  std::vector<std::vector<double>> weight;
};

EnumerationPlan plan_for(const BayesNet& net, const Evidence& ev) {
  EnumerationPlan plan;
  plan.cards = net.cards();
  ev.validate(plan.cards);
  for (NodeId v = 0; v < net.size(); ++v) {
    const Cpt& cpt = net.cpt(v);
    std::vector<std::size_t> s(cpt.parents.size(), 0);
    std::size_t stride = cpt.child_card;
    for (std::size_t k = cpt.parents.size(); k-- > 0;) {
      s[k] = stride;
      stride *= cpt.parent_cards[k];
    }
    plan.parent_strides.push_back(std::move(s));
    std::vector<double> w(plan.cards[v], 1.0);
    if (const EvidenceItem* item = ev.find(v)) {
      if (const auto* hard = std::get_if<HardEvidence>(item)) {
        std::fill(w.begin(), w.end(), 0.0);
        w[hard->state] = 1.0;
      } else {
        w = std::get<SoftEvidence>(*item).likelihood;
      }
    }
    plan.weight.push_back(std::move(w));
  }
  return plan;
}

double joint_entry(const BayesNet& net, const EnumerationPlan& plan, std::size_t index,
                   std::vector<std::size_t>& assignment) {
  const std::size_t n = plan.cards.size();
  for (std::size_t k = n; k-- > 0;) {
    assignment[k] = index % plan.cards[k];
    index /= plan.cards[k];
  }
  double p = 1.0;
  for (NodeId v = 0; v < n; ++v) {
    const Cpt& cpt = net.cpt(v);
    std::size_t offset = assignment[v];
    for (std::size_t k = 0; k < cpt.parents.size(); ++k) {
      offset += assignment[cpt.parents[k]] * plan.parent_strides[v][k];
    }
    p *= cpt.probs[offset] * plan.weight[v][assignment[v]];
  }
  return p;
}

}  // namespace

namespace kernels {

void enumerate_serial(const BayesNet& net, const Evidence& ev, Factor& out) {
  const auto plan = plan_for(net, ev);
  std::vector<std::size_t> assignment(net.size());
  auto& vals = out.mutable_values();
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = joint_entry(net, plan, i, assignment);
}

void enumerate_parallel(const BayesNet& net, const Evidence& ev, Factor& out) {
  const auto plan = plan_for(net, ev);
  auto& vals = out.mutable_values();
  const auto n = static_cast<std::ptrdiff_t>(vals.size());
#pragma omp parallel
  {
    std::vector<std::size_t> assignment(net.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      vals[static_cast<std::size_t>(i)] =
          joint_entry(net, plan, static_cast<std::size_t>(i), assignment);
    }
  }
}

}  // namespace kernels

Factor joint_enumerate(const BayesNet& net, const Evidence& ev, std::uint64_t cap) {
  const std::uint64_t states = net.state_space();
  if (states > cap) {
    throw Error(errc::kStateSpaceTooLarge,
                "joint state space " + std::to_string(states) + " exceeds cap " +
                    std::to_string(cap));
  }
  std::vector<NodeId> scope(net.size());
  for (NodeId v = 0; v < net.size(); ++v) scope[v] = v;
  Factor out(std::move(scope), net.cards(), 0.0);
#ifdef _OPENMP
  if (out.size() >= kernels::kParallelThreshold) {
    kernels::enumerate_parallel(net, ev, out);
    return out;
  }
#endif
  kernels::enumerate_serial(net, ev, out);
  return out;
}

double ci_gap(const Factor& joint, const NodeSet& x, const NodeSet& y, const NodeSet& z) {
  if (x.empty() || y.empty()) return 0.0;
  NodeSet keep = x;
  keep.insert(keep.end(), y.begin(), y.end());
  keep.insert(keep.end(), z.begin(), z.end());
  keep = make_node_set(std::move(keep));
  if (keep.size() != x.size() + y.size() + z.size()) {
    throw Error(errc::kOverlappingSets, "x, y and z must be pairwise disjoint");
  }
  for (NodeId v : keep) (void)joint.position(v);
  Factor m = marginalize_to(joint, keep);
  std::vector<NodeId> order(z.begin(), z.end());
  order.insert(order.end(), y.begin(), y.end());
  order.insert(order.end(), x.begin(), x.end());
  m = permute(m, order);

  auto count = [&](const NodeSet& s) {
    std::size_t n = 1;
    for (NodeId v : s) n *= m.card_of(v);
    return n;
  };
  const std::size_t nz = count(z);
  const std::size_t ny = count(y);
  const std::size_t nx = count(x);
  const auto& t = m.values();
  double gap = 0.0;
  std::vector<double> pxz(nx);
  for (std::size_t iz = 0; iz < nz; ++iz) {
    std::fill(pxz.begin(), pxz.end(), 0.0);
    double pz = 0.0;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const double p = t[(iz * ny + iy) * nx + ix];
        pxz[ix] += p;
        pz += p;
      }
    }
    if (!(pz > 0.0)) continue;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      double pyz = 0.0;
      for (std::size_t ix = 0; ix < nx; ++ix) pyz += t[(iz * ny + iy) * nx + ix];
      if (!(pyz > 0.0)) continue;
      for (std::size_t ix = 0; ix < nx; ++ix) {
        gap = std::max(gap, std::abs(t[(iz * ny + iy) * nx + ix] / pyz - pxz[ix] / pz));
      }
    }
  }
  return gap;
}

double ci_gap_numeric(const BayesNet& net, const CiStatement& s, std::uint64_t cap) {
  if (s.x.empty() || s.y.empty()) return 0.0;
  return ci_gap(joint_enumerate(net, Evidence{}, cap), s.x, s.y, s.z);
}

bool check_ci_numeric(const BayesNet& net, const CiStatement& s, double tol, std::uint64_t cap) {
  return ci_gap_numeric(net, s, cap) <= tol;
}

namespace {

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw Error(errc::kUsageError, "expected NAME=VALUE", text);
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

}  // namespace

Evidence parse_evidence(const BayesNet& net, const std::vector<std::string>& hard,
                        const std::vector<std::string>& soft) {
  Evidence ev;
  for (const auto& item : hard) {
    auto [name, state] = split_assignment(item);
    NodeId v = net.index_of(name);
    ev.set_hard(v, net.variable(v).state_index(state));
  }
  for (const auto& item : soft) {
    auto [name, list] = split_assignment(item);
    NodeId v = net.index_of(name);
    std::vector<double> lik;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        lik.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(errc::kUsageError, "bad likelihood entry '" + tok + "'", name);
      }
    }
    if (ev.contains(v)) {
      throw Error(errc::kConflictingEvidence, "hard and soft evidence on the same variable", name);
    }
    ev.set_soft(v, std::move(lik));
  }
  ev.validate(net.cards());
  return ev;
}

}  // namespace riskgraph
