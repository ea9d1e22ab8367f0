#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "riskgraph/network.hpp"

namespace riskgraph {

// Network document format:
//   {"variables": [{"name", "states": [...]}],
//    "edges": [["parent", "child"], ...],
//    "cpts": [{"child", "parents": [...], "rows": [[...], ...]}],
//    "meta": {...}}
// Rows are row-major over the listed parents, last parent fastest.

// Throws ParseError naming the offending field. Keys outside the four above
// are rejected unless listed in extra_keys.
NetworkDocument parse_network_document(const nlohmann::json& j,
                                       const std::set<std::string>& extra_keys = {});

// Parses JSON text; syntax errors carry a "line N, column M" locus.
nlohmann::json parse_json_text(const std::string& text);

BayesNet load_network(const std::string& text);

// Canonical form: variables in topological order, probabilities with 17
// significant digits, fixed layout. `extra` is appended verbatim as further
// top-level members (each rendered as `"key": value`).
std::string write_network_document(const NetworkDocument& doc,
                                   const std::vector<std::pair<std::string, std::string>>& extra = {});
std::string save_network(const BayesNet& net);

std::string format_probability(double x);

// {"K": "1", "S": [0.3, 0.7]}: a string (or integer) names a state, an array
// is a likelihood vector.
Evidence evidence_from_json(const BayesNet& net, const nlohmann::json& obj);
nlohmann::json evidence_to_json(const BayesNet& net, const Evidence& ev);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace riskgraph
