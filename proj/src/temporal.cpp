#include "riskgraph/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "riskgraph/error.hpp"
#include "riskgraph/io.hpp"

namespace riskgraph {

using nlohmann::json;

namespace {

constexpr const char* kPrevSuffix = "@prev";

bool contains(const NodeSet& s, NodeId v) { return std::binary_search(s.begin(), s.end(), v); }

[[noreturn]] void invalid(const std::string& message, const std::string& locus = {}) {
  throw Error(errc::kInvalidNetwork, message, locus);
}

}  // namespace

DynamicNet::DynamicNet(BayesNet first_slice, const std::vector<std::string>& slice_names,
                       const std::vector<std::pair<std::string, std::string>>& inter_slice,
                       const std::vector<TransitionSpec>& transitions)
    : first_(std::move(first_slice)) {
  const std::size_t n = first_.size();
  std::vector<NodeId> slice_ids;
  for (const auto& name : slice_names) {
    auto id = first_.dag().find(name);
    if (!id) invalid("unknown slice variable '" + name + "'", name);
    slice_ids.push_back(*id);
  }
  slice_ = make_node_set(slice_ids);
  if (slice_.size() != slice_ids.size()) invalid("slice variable listed twice");
  for (NodeId v = 0; v < n; ++v) {
    if (!contains(slice_, v)) static_.push_back(v);
  }
  for (NodeId v : static_) {
    for (NodeId p : first_.dag().parents(v)) {
      if (is_slice(p)) {
        invalid("static variable '" + first_.variable(v).name + "' has a slice parent",
                first_.variable(v).name);
      }
    }
  }

  std::set<std::pair<NodeId, NodeId>> declared;
  for (const auto& [from, to] : inter_slice) {
    auto a = first_.dag().find(from);
    auto b = first_.dag().find(to);
    if (!a || !b) invalid("unknown variable in inter-slice edge " + from + " -> " + to);
    if (!is_slice(*a) || !is_slice(*b)) {
      invalid("inter-slice edge " + from + " -> " + to + " must join slice variables");
    }
    if (!declared.insert({*a, *b}).second) invalid("duplicate inter-slice edge " + from + " -> " + to);
    inter_.emplace_back(*a, *b);
  }

  std::set<std::pair<NodeId, NodeId>> covered;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& spec = transitions[i];
    const std::string locus = "transition_cpts[" + std::to_string(i) + "]";
    auto child = first_.dag().find(spec.child);
    if (!child || !is_slice(*child)) invalid("transition child must be a slice variable", locus);
    if (transition_.count(*child)) invalid("two transition CPTs for '" + spec.child + "'", locus);
    Cpt cpt;
    cpt.child = *child;
    cpt.child_card = first_.variable(*child).cardinality();
    for (const auto& pname : spec.parents) {
      NodeId id = 0;
      if (pname.size() > 5 && pname.ends_with(kPrevSuffix)) {
        const std::string base = pname.substr(0, pname.size() - 5);
        auto b = first_.dag().find(base);
        if (!b || !is_slice(*b)) invalid("lagged parent '" + pname + "' is not a slice variable", locus);
        if (!declared.count({*b, *child})) {
          invalid("lagged parent '" + pname + "' has no inter-slice edge", locus);
        }
        covered.insert({*b, *child});
        id = lagged(*b);
      } else {
        auto p = first_.dag().find(pname);
        if (!p) invalid("unknown parent '" + pname + "'", locus);
        if (*p == *child) invalid("variable cannot be its own parent within a slice", locus);
        id = *p;
      }
      if (std::find(cpt.parents.begin(), cpt.parents.end(), id) != cpt.parents.end()) {
        invalid("parent listed twice", locus);
      }
      cpt.parents.push_back(id);
      cpt.parent_cards.push_back(card(id));
    }
    std::size_t rows = 1;
    for (std::size_t c : cpt.parent_cards) rows *= c;
    if (spec.rows.size() != rows) invalid("expected " + std::to_string(rows) + " rows", locus);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& row = spec.rows[r];
      const std::string rl = locus + ".rows[" + std::to_string(r) + "]";
      if (row.size() != cpt.child_card) invalid("row has wrong length", rl);
      double sum = 0.0;
      for (double x : row) {
        if (!std::isfinite(x) || x < 0.0) invalid("negative or non-finite probability", rl);
        sum += x;
      }
      if (std::abs(sum - 1.0) > kRowRenormalizeTolerance) invalid("row does not sum to one", rl);
      for (double x : row) {
        cpt.probs.push_back(std::abs(sum - 1.0) > kRowRoundingSlack ? x / sum : x);
      }
    }
    transition_.emplace(*child, std::move(cpt));
  }
  if (covered != declared) invalid("every inter-slice edge needs a transition CPT using it");

  std::vector<NodeId> carried = static_;
  for (const auto& [from, to] : inter_) carried.push_back(from);
  carried_ = make_node_set(std::move(carried));

  // Two slices expose any cycle the transition CPTs introduce.
  unroll(*this, 2);
}

bool DynamicNet::is_slice(NodeId v) const { return contains(slice_, v); }

NodeSet DynamicNet::carried_slice_nodes() const {
  NodeSet out;
  for (NodeId v : carried_) {
    if (is_slice(v)) out.push_back(v);
  }
  return out;
}

std::size_t DynamicNet::card(NodeId id) const {
  const std::size_t n = size();
  return first_.variable(id >= n ? id - n : id).cardinality();
}

std::string DynamicNet::slice_name(NodeId u, std::size_t t) const {
  return first_.variable(u).name + "_" + std::to_string(t);
}

std::vector<Factor> DynamicNet::slice_factors(std::size_t t) const {
  std::vector<Factor> out;
  for (NodeId u : slice_) {
    if (t >= 2 && has_transition(u)) {
      out.push_back(factor_from_cpt(transition_.at(u)));
    } else {
      out.push_back(factor_from_cpt(first_.cpt(u)));
    }
  }
  return out;
}

BayesNet unroll(const DynamicNet& dnet, std::size_t slices) {
  if (slices == 0) throw Error(errc::kInvalidArgument, "unroll needs at least one slice");
  const BayesNet& first = dnet.first_slice();
  const std::size_t n = dnet.size();
  NetworkDocument doc;
  doc.meta = first.meta();

  for (NodeId v : dnet.static_nodes()) doc.variables.push_back(first.variable(v));
  for (std::size_t t = 1; t <= slices; ++t) {
    for (NodeId u : dnet.slice_nodes()) {
      doc.variables.push_back({dnet.slice_name(u, t), first.variable(u).states});
    }
  }

  auto name_at = [&](NodeId id, std::size_t t) {
    if (id >= n) return dnet.slice_name(id - n, t - 1);
    return dnet.is_slice(id) ? dnet.slice_name(id, t) : first.variable(id).name;
  };
  auto add_cpt = [&](const Cpt& cpt, std::size_t t) {
    CptSpec spec;
    spec.child = name_at(cpt.child, t);
    for (NodeId p : cpt.parents) {
      spec.parents.push_back(name_at(p, t));
      doc.edges.emplace_back(spec.parents.back(), spec.child);
    }
    for (std::size_t r = 0; r < cpt.row_count(); ++r) {
      auto row = cpt.row(r);
      spec.rows.emplace_back(row.begin(), row.end());
    }
    doc.cpts.push_back(std::move(spec));
  };
  for (NodeId v : dnet.static_nodes()) add_cpt(first.cpt(v), 1);
  for (std::size_t t = 1; t <= slices; ++t) {
    for (NodeId u : dnet.slice_nodes()) {
      add_cpt(t >= 2 && dnet.has_transition(u) ? dnet.transition(u) : first.cpt(u), t);
    }
  }

  for (const auto& v : validate(doc)) {
    if (v.kind == "Cycle") {
      throw Error(errc::kCycleDetected, "unrolled network is cyclic: " + v.message, v.node);
    }
  }
  return BayesNet::from_document(doc);
}

namespace {

// Eliminates everything outside `keep` and returns the normalized joint over
// keep (ascending ids); log of the removed mass is added to log_mass.
Factor reduce_to(const DynamicNet& dnet, std::vector<Factor> factors, const NodeSet& keep,
                 double& log_mass) {
  const std::size_t ids = 2 * dnet.size();
  UndirectedGraph g(std::vector<std::string>(ids, ""));
  for (const auto& f : factors) {
    for (std::size_t i = 0; i < f.scope().size(); ++i) {
      for (std::size_t j = i + 1; j < f.scope().size(); ++j) g.add_edge(f.scope()[i], f.scope()[j]);
    }
  }
  double log_scale = 0.0;
  auto remaining = eliminate_factors(std::move(factors), min_fill_order(g, keep), log_scale);
  std::vector<std::size_t> cards;
  for (NodeId v : keep) cards.push_back(dnet.card(v));
  Factor joint(std::vector<NodeId>(keep.begin(), keep.end()), cards, 1.0);
  for (const auto& f : remaining) joint = product(joint, f);
  joint = permute(joint, std::vector<NodeId>(keep.begin(), keep.end()));
  auto [normalized, z] = normalize(joint);
  log_mass += log_scale + std::log(z);
  return std::move(normalized);
}

Factor evidence_factor(const DynamicNet& dnet, NodeId v, const EvidenceItem& item) {
  const std::size_t c = dnet.card(v);
  std::vector<double> w(c, 0.0);
  if (const auto* hard = std::get_if<HardEvidence>(&item)) {
    w[hard->state] = 1.0;
  } else {
    w = std::get<SoftEvidence>(item).likelihood;
  }
  return Factor({v}, {c}, std::move(w));
}

// Slice-t carried ids become lagged ids so the next slice can refer to them.
Factor to_lagged(const DynamicNet& dnet, const Factor& f) {
  std::vector<NodeId> scope = f.scope();
  for (NodeId& v : scope) {
    if (dnet.is_slice(v)) v = dnet.lagged(v);
  }
  Factor renamed(scope, f.cards(), f.values());
  return permute(renamed, make_node_set(scope));
}

NodeSet current_carried(const DynamicNet& dnet) { return dnet.carried_nodes(); }

}  // namespace

FilterState initial_state(const DynamicNet& dnet) {
  FilterState s;
  std::vector<Factor> factors;
  for (NodeId v : dnet.static_nodes()) factors.push_back(factor_from_cpt(dnet.first_slice().cpt(v)));
  double ignored = 0.0;
  s.belief = reduce_to(dnet, std::move(factors), dnet.static_nodes(), ignored);
  return s;
}

FilterState filter_step(const DynamicNet& dnet, const FilterState& state, const Evidence& ev) {
  ev.validate(dnet.first_slice().cards());
  const std::uint64_t ops_before = factor_op_counter();
  FilterState next;
  next.t = state.t + 1;
  std::vector<Factor> factors = dnet.slice_factors(next.t);
  factors.push_back(state.belief);
  for (const auto& [v, item] : ev.items()) factors.push_back(evidence_factor(dnet, v, item));
  double log_mass = 0.0;
  Factor belief;
  try {
    belief = reduce_to(dnet, std::move(factors), current_carried(dnet), log_mass);
  } catch (const Error& e) {
    if (e.code() != std::string(errc::kZeroMass)) throw;
    throw Error(errc::kZeroMass, "evidence has zero probability at this tick",
                "tick " + std::to_string(next.t));
  }
  next.belief = to_lagged(dnet, belief);
  next.log_evidence = state.log_evidence + log_mass;
  next.last_step_ops = factor_op_counter() - ops_before;
  return next;
}

std::vector<double> predict(const DynamicNet& dnet, const FilterState& state, std::size_t horizon,
                            NodeId target) {
  if (horizon == 0) throw Error(errc::kInvalidArgument, "horizon must be at least 1");
  if (!dnet.is_slice(target)) throw Error(errc::kInvalidNode, "prediction target must be a slice variable");
  FilterState roll = state;
  for (std::size_t k = 1; k < horizon; ++k) roll = filter_step(dnet, roll, {});
  std::vector<Factor> factors = dnet.slice_factors(roll.t + 1);
  factors.push_back(roll.belief);
  double ignored = 0.0;
  return reduce_to(dnet, std::move(factors), {target}, ignored).values();
}

std::vector<Marginal> predict_slice(const DynamicNet& dnet, const FilterState& state) {
  std::vector<Marginal> out;
  for (NodeId u : dnet.slice_nodes()) out.push_back({u, predict(dnet, state, 1, u)});
  return out;
}

std::vector<FilterTick> filter_run(const DynamicNet& dnet, const std::vector<StreamRecord>& stream) {
  std::vector<FilterTick> out;
  FilterState state = initial_state(dnet);
  for (const auto& rec : stream) {
    if (rec.t <= state.t) {
      throw Error(errc::kInvalidArgument, "tick indices must be strictly increasing and start at 1",
                  "tick " + std::to_string(rec.t));
    }
    while (state.t + 1 < rec.t) state = filter_step(dnet, state, {});
    state = filter_step(dnet, state, rec.evidence);
    out.push_back({state, predict_slice(dnet, state)});
  }
  return out;
}

Evidence unrolled_evidence(const DynamicNet& dnet, const BayesNet& unrolled,
                           const std::vector<StreamRecord>& stream) {
  Evidence out;
  for (const auto& rec : stream) {
    for (const auto& [v, item] : rec.evidence.items()) {
      const std::string name =
          dnet.is_slice(v) ? dnet.slice_name(v, rec.t) : dnet.first_slice().variable(v).name;
      out.set(unrolled.index_of(name), item);
    }
  }
  return out;
}

NodeId unrolled_id(const DynamicNet& dnet, const BayesNet& unrolled, NodeId belief_var,
                   std::size_t t) {
  if (belief_var >= dnet.size()) return unrolled.index_of(dnet.slice_name(belief_var - dnet.size(), t));
  return unrolled.index_of(dnet.first_slice().variable(belief_var).name);
}

NodeSet unrolled_carried(const DynamicNet& dnet, const BayesNet& unrolled, std::size_t slices) {
  NodeSet out;
  for (NodeId v : dnet.carried_nodes()) {
    out.push_back(dnet.is_slice(v) ? unrolled.index_of(dnet.slice_name(v, slices))
                                   : unrolled.index_of(dnet.first_slice().variable(v).name));
  }
  return make_node_set(std::move(out));
}

bool is_dynamic_document(const json& j) { return j.is_object() && j.contains("dynamic"); }

DynamicNet parse_dynamic_document(const json& j) {
  NetworkDocument doc = parse_network_document(j, {"dynamic"});
  BayesNet first = BayesNet::from_document(doc);
  if (!is_dynamic_document(j)) throw Error(errc::kParseError, "missing field 'dynamic'", "dynamic");
  const json& d = j.at("dynamic");
  auto fail = [](const std::string& locus, const std::string& msg) {
    throw Error(errc::kParseError, msg, locus);
  };
  if (!d.is_object()) fail("dynamic", "expected an object");
  for (auto it = d.begin(); it != d.end(); ++it) {
    if (it.key() != "slice" && it.key() != "inter_slice" && it.key() != "transition_cpts") {
      fail("dynamic." + it.key(), "unknown field '" + it.key() + "'");
    }
  }
  auto strings = [&](const json& a, const std::string& locus) {
    if (!a.is_array()) fail(locus, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) fail(locus + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(a[i].get<std::string>());
    }
    return out;
  };
  if (!d.contains("slice")) fail("dynamic", "missing field 'slice'");
  auto slice = strings(d["slice"], "dynamic.slice");

  std::vector<std::pair<std::string, std::string>> inter;
  if (d.contains("inter_slice")) {
    const json& e = d["inter_slice"];
    if (!e.is_array()) fail("dynamic.inter_slice", "expected an array");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string locus = "dynamic.inter_slice[" + std::to_string(i) + "]";
      auto pair = strings(e[i], locus);
      if (pair.size() != 2) fail(locus, "expected [from, to]");
      inter.emplace_back(pair[0], pair[1]);
    }
  }

  std::vector<DynamicNet::TransitionSpec> trans;
  if (d.contains("transition_cpts")) {
    const json& t = d["transition_cpts"];
    if (!t.is_array()) fail("dynamic.transition_cpts", "expected an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string locus = "dynamic.transition_cpts[" + std::to_string(i) + "]";
      const json& c = t[i];
      if (!c.is_object()) fail(locus, "expected an object");
      for (auto it = c.begin(); it != c.end(); ++it) {
        if (it.key() != "child" && it.key() != "parents" && it.key() != "rows") {
          fail(locus + "." + it.key(), "unknown field '" + it.key() + "'");
        }
      }
      DynamicNet::TransitionSpec spec;
      if (!c.contains("child") || !c["child"].is_string()) fail(locus + ".child", "expected a string");
      spec.child = c["child"].get<std::string>();
      spec.parents = strings(c.value("parents", json::array()), locus + ".parents");
      if (!c.contains("rows") || !c["rows"].is_array()) fail(locus + ".rows", "expected an array");
      for (std::size_t r = 0; r < c["rows"].size(); ++r) {
        const json& row = c["rows"][r];
        const std::string rl = locus + ".rows[" + std::to_string(r) + "]";
        if (!row.is_array()) fail(rl, "expected an array of numbers");
        std::vector<double> vals;
        for (std::size_t k = 0; k < row.size(); ++k) {
          if (!row[k].is_number()) fail(rl + "[" + std::to_string(k) + "]", "expected a number");
          vals.push_back(row[k].get<double>());
        }
        spec.rows.push_back(std::move(vals));
      }
      trans.push_back(std::move(spec));
    }
  }
  return DynamicNet(std::move(first), slice, inter, trans);
}

DynamicNet load_dynamic(const std::string& text) { return parse_dynamic_document(parse_json_text(text)); }

std::string save_dynamic(const DynamicNet& dnet) {
  const BayesNet& first = dnet.first_slice();
  const std::size_t n = dnet.size();
  auto q = [](const std::string& s) { return json(s).dump(); };
  std::ostringstream os;
  os << "{\n    \"slice\": [";
  for (std::size_t i = 0; i < dnet.slice_nodes().size(); ++i) {
    os << (i ? ", " : "") << q(first.variable(dnet.slice_nodes()[i]).name);
  }
  os << "],\n    \"inter_slice\": [";
  for (std::size_t i = 0; i < dnet.inter_slice().size(); ++i) {
    const auto& [a, b] = dnet.inter_slice()[i];
    os << (i ? ", " : "") << "[" << q(first.variable(a).name) << ", " << q(first.variable(b).name) << "]";
  }
  os << "],\n    \"transition_cpts\": [";
  bool first_cpt = true;
  for (NodeId u : dnet.slice_nodes()) {
    if (!dnet.has_transition(u)) continue;
    const Cpt& cpt = dnet.transition(u);
    os << (first_cpt ? "\n" : ",\n") << "      {\"child\": " << q(first.variable(u).name) << ", \"parents\": [";
    first_cpt = false;
    for (std::size_t i = 0; i < cpt.parents.size(); ++i) {
      const NodeId p = cpt.parents[i];
      const std::string name = p >= n ? first.variable(p - n).name + kPrevSuffix : first.variable(p).name;
      os << (i ? ", " : "") << q(name);
    }
    os << "], \"rows\": [";
    for (std::size_t r = 0; r < cpt.row_count(); ++r) {
      auto row = cpt.row(r);
      os << (r ? ", " : "") << "[";
      for (std::size_t k = 0; k < row.size(); ++k) os << (k ? ", " : "") << format_probability(row[k]);
      os << "]";
    }
    os << "]}";
  }
  os << (first_cpt ? "]" : "\n    ]") << "\n  }";
  return write_network_document(first.to_document(), {{"dynamic", os.str()}});
}

StreamRecord parse_stream_record(const DynamicNet& dnet, const json& j) {
  if (!j.is_object()) throw Error(errc::kParseError, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "t" && it.key() != "evidence") {
      throw Error(errc::kParseError, "unknown field '" + it.key() + "'", it.key());
    }
  }
  if (!j.contains("t") || !j["t"].is_number_integer() || j["t"].get<long long>() < 1) {
    throw Error(errc::kParseError, "'t' must be a positive integer", "t");
  }
  StreamRecord rec;
  rec.t = j["t"].get<std::size_t>();
  if (j.contains("evidence")) rec.evidence = evidence_from_json(dnet.first_slice(), j["evidence"]);
  return rec;
}

std::vector<StreamRecord> parse_stream(const DynamicNet& dnet, const std::string& text) {
  std::vector<StreamRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_stream_record(dnet, parse_json_text(line)));
    } catch (const Error& e) {
      const std::string locus = "line " + std::to_string(lineno) + (e.locus().empty() ? "" : ": " + e.locus());
      throw Error(e.code(), e.what(), locus);
    }
  }
  return out;
}

}  // namespace riskgraph
