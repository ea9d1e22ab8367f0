#include "riskgraph/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "riskgraph/api.hpp"
#include "riskgraph/catalog.hpp"
#include "riskgraph/io.hpp"
#include "riskgraph/service.hpp"

namespace riskgraph {

using api::json;

namespace {

std::string load_text(const std::string& path) {
  try {
    return read_file(path);
  } catch (const Error& e) {
    throw Error(errc::kUsageError, e.what(), path);
  }
}

api::Model load_model(const std::string& path) { return api::parse_model_text(load_text(path)); }

std::pair<std::string, std::string> split_assignment(const std::string& item, const char* flag) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
    throw Error(errc::kUsageError, "expected VAR=VALUE", std::string(flag) + " " + item);
  }
  return {item.substr(0, eq), item.substr(eq + 1)};
}

// --evidence K=1 and --soft S=0.3,0.7 as a JSON evidence object.
json evidence_flags(const std::vector<std::string>& hard, const std::vector<std::string>& soft) {
  json ev = json::object();
  for (const auto& item : hard) {
    const auto [var, state] = split_assignment(item, "--evidence");
    ev[var] = state;
  }
  for (const auto& item : soft) {
    const auto [var, list] = split_assignment(item, "--soft");
    json values = json::array();
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end != tok.c_str() + tok.size()) {
        throw Error(errc::kUsageError, "bad likelihood " + tok, "--soft " + item);
      }
      values.push_back(x);
    }
    if (ev.contains(var)) throw Error(errc::kUsageError, "evidence given twice for " + var, var);
    ev[var] = values;
  }
  return ev;
}

// Flag evidence is checked here so that naming mistakes count as usage errors.
void check_evidence(const BayesNet& net, const json& ev) {
  try {
    evidence_from_json(net, ev);
  } catch (const Error& e) {
    throw Error(errc::kUsageError, e.what(), e.locus());
  }
}

std::string fixed(double x) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(6) << x;
  return ss.str();
}

std::string fixed_list(const json& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fixed(values[i].get<double>());
  }
  return out;
}

std::string joined(const json& names, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += sep;
    out += names[i].get<std::string>();
  }
  return out;
}

struct Options {
  bool json_out = false;
  std::string net_path;
  std::string out_path;
  std::vector<std::string> targets;
  std::vector<std::string> hard;
  std::vector<std::string> soft;
  std::string method = "exact";
  std::vector<std::string> x, y, z;
  std::vector<std::string> observed, reported;
  double threshold = kDefaultAnomalyThreshold;
  std::string stream_path;
  std::string data_path;
  std::string dag_path;
  std::vector<std::string> latent;
  std::uint64_t seed = 0;
  std::size_t max_iters = 200;
  std::optional<double> prior;
  double alpha = 0.05;
  std::string catalog_id;
  std::string addr = "127.0.0.1:8080";
  std::string persist_dir;
  std::uint64_t cap = kDefaultEnumerationCap;
  std::vector<std::string> cors;
};

int cmd_validate(const Options& o, std::ostream& out) {
  const json r = api::validate(parse_json_text(load_text(o.net_path)));
  if (o.json_out) {
    out << api::render(r);
  } else if (r["valid"].get<bool>()) {
    out << "valid (" << r["kind"].get<std::string>() << ")\n";
  } else {
    for (const auto& v : r["violations"]) {
      out << v["kind"].get<std::string>() << " " << v["node"].get<std::string>() << ": "
          << v["message"].get<std::string>() << "\n";
    }
  }
  return r["valid"].get<bool>() ? kExitOk : kExitDomain;
}

int cmd_query(const Options& o, std::ostream& out) {
  const api::Model m = load_model(o.net_path);
  const BayesNet& net = m.require_static();
  const json ev = evidence_flags(o.hard, o.soft);
  check_evidence(net, ev);
  const json r = api::query(net, {{"targets", o.targets}, {"evidence", ev}, {"method", o.method}}, o.cap);
  if (o.json_out) {
    out << api::render(r);
    return kExitOk;
  }
  for (const auto& t : o.targets) out << t << ": " << fixed_list(r["posteriors"][t]["probs"]) << "\n";
  if (r.contains("converged")) {
    out << "converged: " << (r["converged"].get<bool>() ? "yes" : "no") << " after "
        << r["iterations"].get<std::size_t>() << " iterations\n";
  } else {
    out << "log P(evidence): " << fixed(r["log_evidence"].get<double>()) << "\n";
  }
  return kExitOk;
}

int cmd_dsep(const Options& o, std::ostream& out) {
  const api::Model m = load_model(o.net_path);
  const json r = api::dsep(m.require_static(), {{"x", o.x}, {"y", o.y}, {"z", o.z}});
  if (o.json_out) {
    out << api::render(r);
  } else {
    out << "separated: " << (r["separated"].get<bool>() ? "true" : "false") << "\n";
  }
  return kExitOk;
}

int cmd_jtree(const Options& o, std::ostream& out) {
  const api::Model m = load_model(o.net_path);
  const json r = api::jtree(m.require_static());
  if (o.json_out) {
    out << api::render(r);
    return kExitOk;
  }
  out << "cliques:\n";
  for (std::size_t i = 0; i < r["cliques"].size(); ++i) out << "  " << i << ": {" << joined(r["cliques"][i]) << "}\n";
  out << "sepsets:\n";
  for (const auto& e : r["edges"]) {
    out << "  " << e["a"].get<std::size_t>() << "-" << e["b"].get<std::size_t>() << ": {" << joined(e["sepset"])
        << "}\n";
  }
  out << "max clique size: " << r["max_clique_size"].get<std::size_t>() << "\n";
  return kExitOk;
}

int cmd_anomaly(const Options& o, std::ostream& out) {
  const api::Model m = load_model(o.net_path);
  const BayesNet& net = m.require_static();
  const json observed = evidence_flags(o.observed, {});
  const json reported = evidence_flags(o.reported, {});
  check_evidence(net, observed);
  check_evidence(net, reported);
  const json r = api::anomaly(net, {{"observed", observed}, {"reported", reported}, {"threshold", o.threshold}});
  if (o.json_out) {
    out << api::render(r);
    return kExitOk;
  }
  for (const auto& f : r["flags"]) {
    out << f["variable"].get<std::string>() << "=" << f["reported"].get<std::string>() << ": posterior "
        << fixed(f["posterior"].get<double>()) << (f["flagged"].get<bool>() ? "  FLAGGED" : "") << "\n";
  }
  return kExitOk;
}

int cmd_filter(const Options& o, std::ostream& out) {
  const api::Model m = load_model(o.net_path);
  const DynamicNet& dnet = m.require_dynamic();
  const std::string text = load_text(o.stream_path);
  FilterState state = initial_state(dnet);
  json ticks = json::array();
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = parse_json_text(line);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), "line " + std::to_string(lineno));
    }
    ticks.push_back(api::observe(dnet, state, record));
  }
  if (o.json_out) {
    out << api::render({{"ticks", ticks}});
    return kExitOk;
  }
  for (const auto& tick : ticks) {
    const json& b = tick["belief"];
    out << "t=" << b["t"].get<std::size_t>() << "  log P(e): " << fixed(b["log_evidence"].get<double>()) << "\n";
    for (const auto& [name, probs] : b["marginals"].items()) out << "  " << name << ": " << fixed_list(probs) << "\n";
    for (const auto& [name, probs] : tick["prediction"].items()) {
      out << "  next " << name << ": " << fixed_list(probs) << "\n";
    }
  }
  return kExitOk;
}

int cmd_learn(const std::string& which, const Options& o, std::ostream& out) {
  const std::string csv = load_text(o.data_path);
  json r;
  if (which == "structure") {
    r = api::learn_structure(csv, o.seed, o.alpha);
  } else {
    if (o.dag_path.empty()) throw Error(errc::kUsageError, "--dag is required", "learn " + which);
    const api::Model m = load_model(o.dag_path);
    const BayesNet& net = m.require_static();
    r = which == "params" ? api::learn_params(net, csv, o.prior)
                          : api::learn_em(net, csv, o.latent, o.seed, o.max_iters);
    if (!o.out_path.empty()) write_file(o.out_path, api::parse_model(r["network"]).canonical_text());
  }
  if (o.json_out) {
    out << api::render(r);
    return kExitOk;
  }
  out << "rows: " << r["rows"].get<std::size_t>() << "\n";
  if (which == "structure") {
    out << "hill climb (BIC " << fixed(r["hill_climb"]["score"].get<double>()) << "):\n";
    for (const auto& e : r["hill_climb"]["edges"]) out << "  " << e[0].get<std::string>() << " -> " << e[1].get<std::string>() << "\n";
    out << "pc skeleton (alpha " << r["pc"]["alpha"].get<double>() << "):\n";
    for (const auto& e : r["pc"]["skeleton"]) out << "  " << e[0].get<std::string>() << " - " << e[1].get<std::string>() << "\n";
    for (const auto& e : r["pc"]["oriented"]) {
      out << "  collider arm " << e[0].get<std::string>() << " -> " << e[1].get<std::string>() << "\n";
    }
    for (const auto& w : r["pc"]["warnings"]) out << "  warning: " << w.get<std::string>() << "\n";
    return kExitOk;
  }
  if (which == "em") {
    const json& trace = r["trace"];
    out << "latent: " << joined(r["latent"]) << "\n"
        << "iterations: " << r["iterations"].get<std::size_t>()
        << (r["converged"].get<bool>() ? " (converged)" : " (not converged)") << "\n"
        << "log-likelihood: " << fixed(trace.front().get<double>()) << " to " << fixed(trace.back().get<double>())
        << "\n";
  } else if (!r["log_likelihood"].is_null()) {
    out << "log-likelihood: " << fixed(r["log_likelihood"].get<double>()) << "\n";
  }
  if (o.out_path.empty()) out << api::parse_model(r["network"]).canonical_text();
  return kExitOk;
}

int cmd_catalog(const std::string& which, const Options& o, std::ostream& out) {
  if (which == "list") {
    const json r = api::catalog_list();
    if (o.json_out) {
      out << api::render(r);
      return kExitOk;
    }
    for (const auto& e : r["entries"]) {
      out << std::left << std::setw(28) << e["id"].get<std::string>() << std::setw(9) << e["kind"].get<std::string>()
          << e["title"].get<std::string>() << "\n";
    }
    return kExitOk;
  }
  if (which == "show") {
    const json r = api::catalog_show(o.catalog_id);
    if (o.json_out) {
      out << api::render(r);
      return kExitOk;
    }
    out << r["id"].get<std::string>() << ": " << r["title"].get<std::string>() << "\n"
        << "figures: " << joined(r["figures"]) << "\n"
        << "kind: " << r["kind"].get<std::string>() << "\n";
    out << "independence statements:\n";
    for (const auto& c : r["ci_assertions"]) {
      out << "  " << (c["expected"].get<bool>() ? "holds " : "fails ") << "{" << joined(c["x"]) << "} _||_ {"
          << joined(c["y"]) << "} | {" << joined(c["z"]) << "}  " << c["label"].get<std::string>() << "\n";
    }
    out << "queries:\n";
    for (const auto& q : r["queries"]) out << "  " << q["name"].get<std::string>() << ": " << q["doc"].get<std::string>() << "\n";
    return kExitOk;
  }
  // instantiate
  const std::string text = fixture_text(build_entry(o.catalog_id));
  if (!o.out_path.empty()) {
    write_file(o.out_path, text);
    return kExitOk;
  }
  if (o.json_out) {
    out << api::render(json::parse(text));
  } else {
    out << text;
  }
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  ServiceConfig config;
  parse_listen_address(o.addr, config);
  config.persist_dir = o.persist_dir;
  config.enumeration_cap = o.cap;
  config.cors_origins = o.cors;
  Service service(config);
  const int port = service.bind();
  out << "listening on " << config.host << ":" << port << std::endl;
  service.run();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Discrete Bayesian networks for insurance risk models", "riskgraph"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", o.json_out, "Machine-readable output");

  auto* validate = app.add_subcommand("validate", "Check a network document");
  validate->add_option("network", o.net_path)->required();

  auto* query = app.add_subcommand("query", "Posterior marginals given evidence");
  query->add_option("network", o.net_path)->required();
  query->add_option("--target,-t", o.targets)->required()->delimiter(',');
  query->add_option("--evidence,-e", o.hard, "VAR=STATE")->delimiter(',');
  query->add_option("--soft", o.soft, "VAR=L1,L2,...");
  query->add_option("--method", o.method)->check(CLI::IsMember({"exact", "loopy", "enumerate"}));
  query->add_option("--cap", o.cap, "Joint size limit for --method enumerate");

  auto* dsep = app.add_subcommand("dsep", "Test d-separation of X and Y given Z");
  dsep->add_option("network", o.net_path)->required();
  dsep->add_option("--x", o.x)->required()->delimiter(',');
  dsep->add_option("--y", o.y)->required()->delimiter(',');
  dsep->add_option("--z", o.z)->delimiter(',');

  auto* jtree = app.add_subcommand("jtree", "Print the junction tree");
  jtree->add_option("network", o.net_path)->required();

  auto* anomaly = app.add_subcommand("anomaly", "Screen reported values against observed evidence");
  anomaly->add_option("network", o.net_path)->required();
  anomaly->add_option("--observed", o.observed, "VAR=STATE")->delimiter(',');
  anomaly->add_option("--reported", o.reported, "VAR=STATE")->required()->delimiter(',');
  anomaly->add_option("--threshold", o.threshold);

  auto* filter = app.add_subcommand("filter", "Run a dynamic network over an evidence stream");
  filter->add_option("network", o.net_path)->required();
  filter->add_option("--stream", o.stream_path, "NDJSON records")->required();

  auto* learn = app.add_subcommand("learn", "Fit parameters or structure from CSV data");
  learn->require_subcommand(1);
  for (const char* which : {"params", "em", "structure"}) {
    auto* sub = learn->add_subcommand(which);
    sub->add_option("data", o.data_path)->required();
    sub->add_option("--seed", o.seed);
    if (std::string(which) == "structure") {
      sub->add_option("--alpha", o.alpha, "Significance level for the PC tests");
      continue;
    }
    sub->add_option("--dag", o.dag_path, "Network whose structure and states are used");
    sub->add_option("--out", o.out_path, "Write the fitted network here");
    if (std::string(which) == "params") {
      sub->add_option("--prior", o.prior, "Dirichlet equivalent sample size");
    } else {
      sub->add_option("--latent", o.latent)->delimiter(',');
      sub->add_option("--max-iters", o.max_iters);
    }
  }

  auto* catalog = app.add_subcommand("catalog", "Built-in example networks");
  catalog->require_subcommand(1);
  catalog->add_subcommand("list");
  catalog->add_subcommand("show")->add_option("id", o.catalog_id)->required();
  auto* inst = catalog->add_subcommand("instantiate");
  inst->add_option("id", o.catalog_id)->required();
  inst->add_option("--out", o.out_path);

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--addr", o.addr, "host:port")->envname("RISKGRAPH_ADDR");
  serve->add_option("--persist", o.persist_dir, "Directory for stored networks")->envname("RISKGRAPH_PERSIST_DIR");
  serve->add_option("--cap", o.cap, "Enumeration cap")->envname("RISKGRAPH_ENUMERATION_CAP");
  serve->add_option("--cors", o.cors, "Allowed origins")->delimiter(',')->envname("RISKGRAPH_CORS");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out);
    if (query->parsed()) return cmd_query(o, out);
    if (dsep->parsed()) return cmd_dsep(o, out);
    if (jtree->parsed()) return cmd_jtree(o, out);
    if (anomaly->parsed()) return cmd_anomaly(o, out);
    if (filter->parsed()) return cmd_filter(o, out);
    if (learn->parsed()) return cmd_learn(learn->get_subcommands().front()->get_name(), o, out);
    if (catalog->parsed()) return cmd_catalog(catalog->get_subcommands().front()->get_name(), o, out);
    return cmd_serve(o, out);
  } catch (const Error& e) {
    err << api::render(api::error_body(e));
    return e.is_input_error() ? kExitUsage : kExitDomain;
  } catch (const json::exception& e) {
    err << api::render(api::error_body(Error(errc::kParseError, e.what())));
    return kExitUsage;
  }
}

}  // namespace riskgraph
