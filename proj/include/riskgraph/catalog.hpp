#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskgraph/evidence.hpp"
#include "riskgraph/network.hpp"
#include "riskgraph/temporal.hpp"

namespace riskgraph {

// CI statement over variable names, with a short reading of it.
struct CatalogCi {
  std::string label;
  std::vector<std::string> x;
  std::vector<std::string> y;
  std::vector<std::string> z;
  bool expected = true;

  CiStatement resolve(const BayesNet& net) const;
};

struct CatalogQuery {
  std::string name;
  std::string doc;
  std::vector<std::string> targets;
  std::map<std::string, std::string> evidence;  // variable -> state label
};

// Dynamic entries unroll this many slices for their CI assertions.
inline constexpr std::size_t kCatalogUnrollSlices = 3;

struct CatalogEntry {
  std::string id;
  std::string title;
  std::vector<std::string> figures;
  // Static network, or the unrolled network for dynamic entries.
  BayesNet net;
  std::optional<DynamicNet> dynamic;
  std::vector<CatalogCi> ci_assertions;
  std::vector<CatalogQuery> queries;

  bool is_dynamic() const noexcept { return dynamic.has_value(); }
};

// Every buildable id, variants spelled "base:variant".
const std::vector<std::string>& catalog_ids();
// A base id without a variant builds its default variant. Throws NotFound.
CatalogEntry build_entry(const std::string& id);

// Fixture file name for an id ("base.variant.json").
std::string fixture_file(const std::string& id);
// Serialized fixture text: a network document or a dynamic document.
std::string fixture_text(const CatalogEntry& entry);
// {"version": 1, "entries": [{"id", "base", "file", "figures", "kind", "title"}]}
nlohmann::json catalog_manifest();

// Frequency-severity check on a network with numeric N and S states (values
// in meta "numeric_values") and explanatory X1, X2. Gaps are relative to
// max(1, |expectation|).
struct FreqSevReport {
  double gap_iterated = 0.0;   // |E(C|x) - sum_n P(n|x) n E(S|n,x)|, max over x
  double gap_severity = 0.0;   // |E(S|n,x) - E(S|x)|, max over x and n with P(n|x) > 0
  double gap_product = 0.0;    // |E(C|x) - E(N|x) E(S|x)|, max over x
  double expected_claims = 0.0;
  double expected_severity = 0.0;
  double expected_frequency = 0.0;
  bool iterated_pass = false;
  bool severity_pass = false;
};

FreqSevReport verify_frequency_severity(const BayesNet& net, double tol);
// The frequency-severity net with an added N -> S edge.
BayesNet freq_severity_dependent();
// The frequency-severity net with N fixed at one claim.
BayesNet freq_severity_single_claim();

// Capital = asset value - liability value, from the per-state values in meta
// "capital".
struct CapitalReport {
  std::vector<double> assets;       // posterior of A
  std::vector<double> liabilities;  // posterior of L
  std::vector<std::pair<double, double>> capital;  // (value, probability), ascending
  double quantile = 0.0;
};

CapitalReport capital_whatif(const BayesNet& net, const Evidence& scenario, double quantile);

struct AnomalyFlag {
  NodeId var = 0;
  std::size_t reported_state = 0;
  double posterior = 0.0;  // of the reported state given the observed evidence
  bool flagged = false;
};

inline constexpr double kDefaultAnomalyThreshold = 0.05;

// Reported items must be hard evidence on variables disjoint from observed.
std::vector<AnomalyFlag> anomaly_screen(const BayesNet& net, const Evidence& observed,
                                        const Evidence& reported,
                                        double threshold = kDefaultAnomalyThreshold);

}  // namespace riskgraph
