#pragma once

// JSON request/response layer shared by the CLI's --json output and the HTTP
// service, so both render the same bytes for the same request.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskgraph/error.hpp"
#include "riskgraph/learning.hpp"
#include "riskgraph/network.hpp"
#include "riskgraph/temporal.hpp"

namespace riskgraph::api {

using nlohmann::json;

std::string render(const json& j);

json error_body(const Error& e);
int http_status(const Error& e);

// A stored model: a plain network or a dynamic one.
struct Model {
  std::optional<BayesNet> net;
  std::optional<DynamicNet> dynamic;

  bool is_dynamic() const noexcept { return dynamic.has_value(); }
  // Throws InvalidArgument for dynamic models.
  const BayesNet& require_static() const;
  const DynamicNet& require_dynamic() const;
  std::string canonical_text() const;
  json document() const;
  std::string name() const;  // meta "name" or ""
};

// Parses either document kind. Invalid networks throw InvalidNetwork; the
// full list is available from validate().
Model parse_model(const json& doc);
Model parse_model_text(const std::string& text);

json violations_json(const std::vector<Violation>& vs);
// {"valid", "kind", "violations"}; parse errors still throw.
json validate(const json& doc);

// body: {"targets": [...], "evidence": {...}, "method": "exact"|"loopy"|"enumerate"}
json query(const BayesNet& net, const json& body, std::uint64_t cap = kDefaultEnumerationCap);
// body: {"x": [...], "y": [...], "z": [...]}
json dsep(const BayesNet& net, const json& body);
json jtree(const BayesNet& net);
// body: {"observed": {...}, "reported": {...}, "threshold": 0.05}
json anomaly(const BayesNet& net, const json& body);

json catalog_list();
json catalog_show(const std::string& id);

// Learning. Data is CSV text; with a network its variables are the schema.
json learn_params(const BayesNet& net, const std::string& csv, std::optional<double> alpha);
// Latent variables are the network's variables missing from the data; every
// name in `latent` must be one of them.
json learn_em(const BayesNet& net, const std::string& csv, const std::vector<std::string>& latent,
              std::uint64_t seed, std::size_t max_iters);
json learn_structure(const std::string& csv, std::uint64_t seed, double alpha);

// Advances the filter to the record's tick (filling skipped ticks with no
// evidence) and reports the new belief and one-step prediction.
json observe(const DynamicNet& dnet, FilterState& state, const json& record);
json belief_json(const DynamicNet& dnet, const FilterState& state);

}  // namespace riskgraph::api
