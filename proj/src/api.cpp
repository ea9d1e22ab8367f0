#include "riskgraph/api.hpp"

#include <algorithm>
#include <cmath>

#include "riskgraph/catalog.hpp"
#include "riskgraph/exact.hpp"
#include "riskgraph/graph.hpp"
#include "riskgraph/io.hpp"
#include "riskgraph/loopy.hpp"

namespace riskgraph::api {

namespace {

std::vector<std::string> string_list(const json& body, const char* key, bool required) {
  if (!body.contains(key)) {
    if (required) throw Error(errc::kParseError, std::string("missing field ") + key, key);
    return {};
  }
  const json& v = body.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw Error(errc::kParseError, "expected a list of names", key);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) {
      throw Error(errc::kParseError, "expected a name", std::string(key) + "[" + std::to_string(i) + "]");
    }
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

Evidence evidence_field(const BayesNet& net, const json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return {};
  if (!body.at(key).is_object()) throw Error(errc::kParseError, "evidence must be an object", key);
  return evidence_from_json(net, body.at(key));
}

json distribution(const Variable& v, const std::vector<double>& probs) {
  return {{"states", v.states}, {"probs", probs}};
}

void require_object(const json& body) {
  if (!body.is_object()) throw Error(errc::kParseError, "request body must be a JSON object");
}

}  // namespace

std::string render(const json& j) { return j.dump(2) + "\n"; }

json error_body(const Error& e) {
  return {{"code", e.code()}, {"message", e.what()}, {"locus", e.locus()}};
}

int http_status(const Error& e) {
  if (e.code() == errc::kNotFound) return 404;
  if (e.code() == errc::kZeroMass) return 409;
  return 400;
}

const BayesNet& Model::require_static() const {
  if (!net) throw Error(errc::kInvalidArgument, "operation needs a static network; this one is dynamic");
  return *net;
}

const DynamicNet& Model::require_dynamic() const {
  if (!dynamic) throw Error(errc::kInvalidArgument, "operation needs a dynamic network");
  return *dynamic;
}

std::string Model::canonical_text() const {
  return dynamic ? save_dynamic(*dynamic) : save_network(*net);
}

json Model::document() const { return json::parse(canonical_text()); }

std::string Model::name() const {
  const json& meta = dynamic ? dynamic->meta() : net->meta();
  return meta.contains("name") && meta["name"].is_string() ? meta["name"].get<std::string>() : "";
}

Model parse_model(const json& doc) {
  Model m;
  if (is_dynamic_document(doc)) {
    m.dynamic = parse_dynamic_document(doc);
  } else {
    m.net = BayesNet::from_document(parse_network_document(doc));
  }
  return m;
}

Model parse_model_text(const std::string& text) { return parse_model(parse_json_text(text)); }

json violations_json(const std::vector<Violation>& vs) {
  json out = json::array();
  for (const auto& v : vs) {
    json item = {{"kind", v.kind}, {"node", v.node}, {"message", v.message}};
    if (v.row >= 0) item["row"] = v.row;
    out.push_back(std::move(item));
  }
  return out;
}

json validate(const json& doc) {
  if (is_dynamic_document(doc)) {
    try {
      parse_dynamic_document(doc);
      return {{"valid", true}, {"kind", "dynamic"}, {"violations", json::array()}};
    } catch (const Error& e) {
      if (e.code() == errc::kParseError) throw;
      return {{"valid", false},
              {"kind", "dynamic"},
              {"violations", json::array({{{"kind", e.code()}, {"node", e.locus()}, {"message", e.what()}}})}};
    }
  }
  const auto vs = riskgraph::validate(parse_network_document(doc));
  return {{"valid", vs.empty()}, {"kind", "static"}, {"violations", violations_json(vs)}};
}

json query(const BayesNet& net, const json& body, std::uint64_t cap) {
  require_object(body);
  const auto targets = string_list(body, "targets", true);
  if (targets.empty()) throw Error(errc::kParseError, "no targets", "targets");
  const NodeSet ids = net.resolve(targets);
  const Evidence ev = evidence_field(net, body, "evidence");
  const std::string method = body.value("method", "exact");

  json posteriors = json::object();
  json out;
  if (method == "exact") {
    const CliqueTree tree = build_junction_tree(net);
    const CalibratedTree cal = calibrate(tree, ev);
    for (const auto& m : query_marginals(cal, ids)) posteriors[net.variable(m.var).name] = distribution(net.variable(m.var), m.probs);
    out["log_evidence"] = cal.log_normalizer;
  } else if (method == "loopy") {
    BpSettings s;
    if (body.contains("max_iters")) s.max_iters = body.at("max_iters").get<std::size_t>();
    if (body.contains("damping")) s.damping = body.at("damping").get<double>();
    const BpResult r = loopy_bp(net, ev, s);
    for (NodeId v : ids) posteriors[net.variable(v).name] = distribution(net.variable(v), r.marginals[v].probs);
    out["converged"] = r.converged;
    out["iterations"] = r.iterations;
    out["log_evidence"] = nullptr;
  } else if (method == "enumerate") {
    const Factor joint = joint_enumerate(net, ev, cap);
    const double total = joint.total();
    if (!(total > 0.0)) throw Error(errc::kZeroMass, "evidence has zero probability");
    for (NodeId v : ids) {
      auto probs = marginalize_to(joint, {v}).values();
      for (double& p : probs) p /= total;
      posteriors[net.variable(v).name] = distribution(net.variable(v), probs);
    }
    out["log_evidence"] = std::log(total);
  } else {
    throw Error(errc::kParseError, "unknown method " + method, "method");
  }
  out["method"] = method;
  out["posteriors"] = std::move(posteriors);
  return out;
}

json dsep(const BayesNet& net, const json& body) {
  require_object(body);
  const NodeSet x = net.resolve(string_list(body, "x", true));
  const NodeSet y = net.resolve(string_list(body, "y", true));
  const NodeSet z = net.resolve(string_list(body, "z", false));
  return {{"separated", d_separated(net.dag(), x, y, z)}};
}

json jtree(const BayesNet& net) {
  const CliqueTree tree = build_junction_tree(net);
  const auto names = [&](const NodeSet& s) {
    std::vector<std::string> out;
    for (NodeId v : s) out.push_back(net.variable(v).name);
    return out;
  };
  json cliques = json::array();
  for (const auto& c : tree.cliques) cliques.push_back(names(c));
  json edges = json::array();
  for (const auto& e : tree.edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"sepset", names(e.sepset)}});
  return {{"cliques", cliques}, {"edges", edges}, {"max_clique_size", tree.max_clique_size()}};
}

json anomaly(const BayesNet& net, const json& body) {
  require_object(body);
  const Evidence observed = evidence_field(net, body, "observed");
  const Evidence reported = evidence_field(net, body, "reported");
  const double threshold = body.value("threshold", kDefaultAnomalyThreshold);
  json flags = json::array();
  for (const auto& f : anomaly_screen(net, observed, reported, threshold)) {
    const Variable& v = net.variable(f.var);
    flags.push_back({{"variable", v.name},
                     {"reported", v.states[f.reported_state]},
                     {"posterior", f.posterior},
                     {"flagged", f.flagged}});
  }
  return {{"threshold", threshold}, {"flags", flags}};
}

json catalog_list() { return catalog_manifest(); }

json catalog_show(const std::string& id) {
  const CatalogEntry e = build_entry(id);
  json ci = json::array();
  for (const auto& c : e.ci_assertions) {
    ci.push_back({{"label", c.label}, {"x", c.x}, {"y", c.y}, {"z", c.z}, {"expected", c.expected}});
  }
  json queries = json::array();
  for (const auto& q : e.queries) {
    queries.push_back({{"name", q.name}, {"doc", q.doc}, {"targets", q.targets}, {"evidence", q.evidence}});
  }
  return {{"id", e.id},
          {"title", e.title},
          {"figures", e.figures},
          {"kind", e.is_dynamic() ? "dynamic" : "static"},
          {"ci_assertions", ci},
          {"queries", queries},
          {"document", json::parse(fixture_text(e))}};
}

json learn_params(const BayesNet& net, const std::string& csv, std::optional<double> alpha) {
  const Dataset data = parse_dataset(csv, net.variables());
  std::optional<DirichletPrior> prior;
  if (alpha) prior = DirichletPrior{*alpha};
  const BayesNet fitted = fit_mle(net.dag(), net.variables(), data, prior);
  json out = {{"rows", data.size()}, {"network", json::parse(save_network(fitted))}};
  out["log_likelihood"] = data.complete() ? json(log_likelihood(fitted, data)) : json(nullptr);
  return out;
}

json learn_em(const BayesNet& net, const std::string& csv, const std::vector<std::string>& latent,
              std::uint64_t seed, std::size_t max_iters) {
  const Dataset data = parse_dataset(csv, net.variables());
  std::vector<std::string> missing;
  for (const auto& v : net.variables()) {
    if (!data.column(v.name)) missing.push_back(v.name);
  }
  for (const auto& name : latent) {
    net.resolve({name});
    if (std::find(missing.begin(), missing.end(), name) == missing.end()) {
      throw Error(errc::kUsageError, "latent variable " + name + " has a data column", name);
    }
  }
  EmSettings s;
  s.seed = seed;
  s.max_iters = max_iters;
  const EmResult r = fit_em(net.dag(), net.variables(), data, s);
  return {{"rows", data.size()},
          {"latent", missing},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"trace", r.trace},
          {"network", json::parse(save_network(r.net))}};
}

json learn_structure(const std::string& csv, std::uint64_t seed, double alpha) {
  const Dataset data = parse_dataset(csv);
  const auto name = [&](NodeId v) { return data.variables[v].name; };
  const auto pairs = [&](const std::vector<std::pair<NodeId, NodeId>>& es) {
    json out = json::array();
    for (const auto& [a, b] : es) out.push_back({name(a), name(b)});
    return out;
  };
  StructureSearchSettings s;
  s.seed = seed;
  const HillClimbResult hc = hill_climb(data, s);
  const PcResult pc = pc_skeleton(data, alpha);
  json sepsets = json::array();
  for (const auto& [key, z] : pc.separating_sets) {
    json zs = json::array();
    for (NodeId v : z) zs.push_back(name(v));
    sepsets.push_back({{"x", name(key.first)}, {"y", name(key.second)}, {"z", zs}});
  }
  return {{"rows", data.size()},
          {"hill_climb", {{"edges", pairs(hc.dag.edges())}, {"score", hc.score}, {"restart_scores", hc.restart_scores}}},
          {"pc",
           {{"alpha", alpha},
            {"skeleton", pairs(pc.skeleton.edges())},
            {"oriented", pairs(pc.oriented)},
            {"separating_sets", sepsets},
            {"warnings", pc.warnings}}}};
}

json belief_json(const DynamicNet& dnet, const FilterState& state) {
  const auto name = [&](NodeId id) {
    return id < dnet.size() ? dnet.first_slice().variable(id).name : dnet.slice_name(id - dnet.size(), state.t);
  };
  const auto& scope = state.belief.scope();
  json names = json::array();
  for (NodeId id : scope) names.push_back(name(id));
  json marginals = json::object();
  for (NodeId id : scope) marginals[name(id)] = marginalize_to(state.belief, {id}).values();
  return {{"t", state.t},
          {"scope", names},
          {"values", state.belief.values()},
          {"marginals", marginals},
          {"log_evidence", state.log_evidence}};
}

json observe(const DynamicNet& dnet, FilterState& state, const json& record) {
  const StreamRecord rec = parse_stream_record(dnet, record);
  if (rec.t <= state.t) {
    throw Error(errc::kInvalidArgument,
                "tick " + std::to_string(rec.t) + " does not follow tick " + std::to_string(state.t),
                "tick " + std::to_string(rec.t));
  }
  FilterState next = state;
  while (next.t + 1 < rec.t) next = filter_step(dnet, next, {});
  next = filter_step(dnet, next, rec.evidence);
  state = std::move(next);
  json prediction = json::object();
  for (const auto& m : predict_slice(dnet, state)) {
    prediction[dnet.slice_name(m.var, state.t + 1)] = m.probs;
  }
  return {{"belief", belief_json(dnet, state)}, {"prediction", prediction}};
}

}  // namespace riskgraph::api
