#include "riskgraph/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "riskgraph/error.hpp"

namespace riskgraph {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& locus, const std::string& message) {
  throw Error(errc::kParseError, message, locus);
}

const json& require(const json& obj, const char* key, const std::string& locus) {
  auto it = obj.find(key);
  if (it == obj.end()) field_error(locus, std::string("missing field '") + key + "'");
  return *it;
}

std::string as_string(const json& j, const std::string& locus) {
  if (!j.is_string()) field_error(locus, "expected a string");
  return j.get<std::string>();
}

std::vector<std::string> as_string_list(const json& j, const std::string& locus) {
  if (!j.is_array()) field_error(locus, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_string(j[i], locus + "[" + std::to_string(i) + "]"));
  }
  return out;
}

double as_number(const json& j, const std::string& locus) {
  if (!j.is_number()) field_error(locus, "expected a number");
  return j.get<double>();
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& locus, const std::set<std::string>& extra = {}) {
  if (!obj.is_object()) field_error(locus, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = extra.count(it.key()) > 0;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      field_error(locus.empty() ? it.key() : locus + "." + it.key(),
                  "unknown field '" + it.key() + "'");
    }
  }
}

std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace

NetworkDocument parse_network_document(const json& j, const std::set<std::string>& extra_keys) {
  check_keys(j, {"variables", "edges", "cpts", "meta"}, "", extra_keys);
  NetworkDocument doc;

  const json& vars = require(j, "variables", "");
  if (!vars.is_array()) field_error("variables", "expected an array");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string locus = "variables[" + std::to_string(i) + "]";
    check_keys(vars[i], {"name", "states"}, locus);
    Variable v;
    v.name = as_string(require(vars[i], "name", locus), locus + ".name");
    v.states = as_string_list(require(vars[i], "states", locus), locus + ".states");
    doc.variables.push_back(std::move(v));
  }

  const json& edges = require(j, "edges", "");
  if (!edges.is_array()) field_error("edges", "expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string locus = "edges[" + std::to_string(i) + "]";
    auto pair = as_string_list(edges[i], locus);
    if (pair.size() != 2) field_error(locus, "an edge is a [parent, child] pair");
    doc.edges.emplace_back(pair[0], pair[1]);
  }

  const json& cpts = require(j, "cpts", "");
  if (!cpts.is_array()) field_error("cpts", "expected an array");
  for (std::size_t i = 0; i < cpts.size(); ++i) {
    const std::string locus = "cpts[" + std::to_string(i) + "]";
    check_keys(cpts[i], {"child", "parents", "rows"}, locus);
    CptSpec spec;
    spec.child = as_string(require(cpts[i], "child", locus), locus + ".child");
    spec.parents = as_string_list(require(cpts[i], "parents", locus), locus + ".parents");
    const json& rows = require(cpts[i], "rows", locus);
    if (!rows.is_array()) field_error(locus + ".rows", "expected an array of rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string rl = locus + ".rows[" + std::to_string(r) + "]";
      if (!rows[r].is_array()) field_error(rl, "expected an array of numbers");
      std::vector<double> row;
      for (std::size_t k = 0; k < rows[r].size(); ++k) {
        row.push_back(as_number(rows[r][k], rl + "[" + std::to_string(k) + "]"));
      }
      spec.rows.push_back(std::move(row));
    }
    doc.cpts.push_back(std::move(spec));
  }

  if (auto it = j.find("meta"); it != j.end()) {
    if (!it->is_object()) field_error("meta", "expected an object");
    doc.meta = *it;
  }
  return doc;
}

json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(errc::kParseError, "malformed JSON",
                "line " + std::to_string(line) + ", column " + std::to_string(column));
  }
}

BayesNet load_network(const std::string& text) {
  return BayesNet::from_document(parse_network_document(parse_json_text(text)));
}

std::string format_probability(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string write_network_document(const NetworkDocument& doc,
                                   const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream out;
  out << "{\n  \"variables\": [";
  for (std::size_t i = 0; i < doc.variables.size(); ++i) {
    const auto& v = doc.variables[i];
    out << (i ? ",\n" : "\n") << "    {\"name\": " << quoted(v.name) << ", \"states\": [";
    for (std::size_t s = 0; s < v.states.size(); ++s) out << (s ? ", " : "") << quoted(v.states[s]);
    out << "]}";
  }
  out << (doc.variables.empty() ? "]" : "\n  ]") << ",\n  \"edges\": [";
  for (std::size_t i = 0; i < doc.edges.size(); ++i) {
    out << (i ? ",\n" : "\n") << "    [" << quoted(doc.edges[i].first) << ", "
        << quoted(doc.edges[i].second) << "]";
  }
  out << (doc.edges.empty() ? "]" : "\n  ]") << ",\n  \"cpts\": [";
  for (std::size_t i = 0; i < doc.cpts.size(); ++i) {
    const auto& c = doc.cpts[i];
    out << (i ? ",\n" : "\n") << "    {\"child\": " << quoted(c.child) << ", \"parents\": [";
    for (std::size_t p = 0; p < c.parents.size(); ++p) out << (p ? ", " : "") << quoted(c.parents[p]);
    out << "], \"rows\": [";
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
      out << (r ? ",\n      " : "\n      ") << "[";
      for (std::size_t k = 0; k < c.rows[r].size(); ++k) {
        out << (k ? ", " : "") << format_probability(c.rows[r][k]);
      }
      out << "]";
    }
    out << (c.rows.empty() ? "]}" : "\n    ]}");
  }
  out << (doc.cpts.empty() ? "]" : "\n  ]") << ",\n  \"meta\": "
      << (doc.meta.is_null() ? json::object() : doc.meta).dump();
  for (const auto& [key, value] : extra) out << ",\n  " << quoted(key) << ": " << value;
  out << "\n}\n";
  return out.str();
}

std::string save_network(const BayesNet& net) { return write_network_document(net.to_document()); }

Evidence evidence_from_json(const BayesNet& net, const json& obj) {
  if (obj.is_null()) return {};
  if (!obj.is_object()) field_error("evidence", "expected an object");
  Evidence ev;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const NodeId v = net.index_of(it.key());
    const json& value = it.value();
    if (value.is_array()) {
      std::vector<double> lik;
      for (std::size_t k = 0; k < value.size(); ++k) {
        lik.push_back(as_number(value[k], "evidence." + it.key()));
      }
      ev.set_soft(v, std::move(lik));
    } else if (value.is_string()) {
      ev.set_hard(v, net.variable(v).state_index(value.get<std::string>()));
    } else if (value.is_number_integer()) {
      ev.set_hard(v, net.variable(v).state_index(std::to_string(value.get<long long>())));
    } else {
      field_error("evidence." + it.key(), "expected a state label or a likelihood array");
    }
  }
  ev.validate(net.cards());
  return ev;
}

json evidence_to_json(const BayesNet& net, const Evidence& ev) {
  json out = json::object();
  for (const auto& [v, item] : ev.items()) {
    if (const auto* hard = std::get_if<HardEvidence>(&item)) {
      out[net.variable(v).name] = net.variable(v).states.at(hard->state);
    } else {
      out[net.variable(v).name] = std::get<SoftEvidence>(item).likelihood;
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::kNotFound, "cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(errc::kInvalidArgument, "cannot write file", path);
  out << contents;
}

}  // namespace riskgraph
