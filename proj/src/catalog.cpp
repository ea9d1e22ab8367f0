#include "riskgraph/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "riskgraph/error.hpp"
#include "riskgraph/exact.hpp"
#include "riskgraph/io.hpp"

namespace riskgraph {

namespace {

constexpr const char* kGenerator =
    "rows drawn as 0.1 + U(0,1) per state, normalized, rounded to 4 decimals (last entry takes the "
    "remainder); U from the top 53 bits of mt19937_64";

double round4(double x) { return std::round(x * 1e4) / 1e4; }

class NetBuilder {
 public:
  explicit NetBuilder(std::uint64_t seed) : rng_(seed) {
    doc_.meta["fixture"] = {{"seed", seed}, {"generator", kGenerator}};
  }

  // Adds a variable with its CPT; empty rows draws a generic table.
  NetBuilder& node(const std::string& name, std::vector<std::string> states,
                   const std::vector<std::string>& parents = {},
                   std::vector<std::vector<double>> rows = {}) {
    std::size_t n_rows = 1;
    for (const auto& p : parents) {
      n_rows *= card(p);
      doc_.edges.emplace_back(p, name);
    }
    if (rows.empty()) rows = generic_rows(n_rows, states.size());
    doc_.variables.push_back({name, std::move(states)});
    doc_.cpts.push_back({name, parents, std::move(rows)});
    return *this;
  }

  std::vector<std::vector<double>> generic_rows(std::size_t n_rows, std::size_t k) {
    std::vector<std::vector<double>> rows(n_rows, std::vector<double>(k));
    for (auto& row : rows) {
      double total = 0.0;
      for (auto& x : row) {
        x = 0.1 + static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        total += x;
      }
      double head = 0.0;
      for (std::size_t j = 0; j + 1 < k; ++j) {
        row[j] = round4(row[j] / total);
        head += row[j];
      }
      row[k - 1] = round4(1.0 - head);
    }
    return rows;
  }

  // Square table for a parent with the child's own states: the child copies
  // the parent with probability `stay`, otherwise follows a generic row.
  std::vector<std::vector<double>> persistent_rows(std::size_t k, double stay) {
    auto rows = generic_rows(k, k);
    for (std::size_t r = 0; r < k; ++r) {
      double head = 0.0;
      for (std::size_t j = 0; j + 1 < k; ++j) {
        rows[r][j] = round4((1.0 - stay) * rows[r][j] + (r == j ? stay : 0.0));
        head += rows[r][j];
      }
      rows[r][k - 1] = round4(1.0 - head);
    }
    return rows;
  }

  std::size_t card(const std::string& name) const {
    for (const auto& v : doc_.variables) {
      if (v.name == name) return v.cardinality();
    }
    throw Error(errc::kInvalidNode, "unknown variable " + name);
  }

  nlohmann::json& meta() { return doc_.meta; }
  NetworkDocument& doc() { return doc_; }
  BayesNet build() const { return BayesNet::from_document(doc_); }

 private:
  NetworkDocument doc_;
  std::mt19937_64 rng_;
};

const std::vector<std::string> kBinary{"0", "1"};

std::vector<std::string> bins(std::size_t k) {
  std::vector<std::string> s;
  for (std::size_t i = 1; i <= k; ++i) s.push_back("b" + std::to_string(i));
  return s;
}

CatalogEntry entry(std::string id, std::string title, std::vector<std::string> figures, BayesNet net) {
  CatalogEntry e;
  e.id = std::move(id);
  e.title = std::move(title);
  e.figures = std::move(figures);
  e.net = std::move(net);
  return e;
}

CatalogEntry dynamic_entry(std::string id, std::string title, std::vector<std::string> figures,
                           DynamicNet dnet) {
  CatalogEntry e;
  e.id = std::move(id);
  e.title = std::move(title);
  e.figures = std::move(figures);
  e.net = unroll(dnet, kCatalogUnrollSlices);
  e.dynamic = std::move(dnet);
  return e;
}

CatalogEntry commercial_auto() {
  NetBuilder b(101);
  b.meta()["description"] = "Business class acts on claims only through parking time; speed acts directly.";
  b.node("B", {"retail", "trades", "delivery"})
      .node("P", {"short", "long"}, {"B"})
      .node("S", {"low", "high"})
      .node("C", {"none", "some"}, {"P", "S"});
  auto e = entry("fig1_commercial_auto", "Commercial auto claims", {"1"}, b.build());
  e.ci_assertions = {{"business class irrelevant given parking time", {"B"}, {"C"}, {"P"}, true},
                     {"business class predicts claims marginally", {"B"}, {"C"}, {}, false}};
  e.queries = {{"claims_by_class", "Claims for a delivery business", {"C"}, {{"B", "delivery"}}},
               {"claims_by_parking", "Claims once parking time is known", {"C"}, {{"P", "long"}}}};
  return e;
}

CatalogEntry home(const std::string& variant) {
  NetBuilder b(201);
  b.meta()["description"] = "Construction class K, door alarm D, property claim C.";
  const std::vector<std::vector<double>> k{{0.5, 0.5}};
  std::vector<CatalogCi> ci;
  if (variant == "independent") {
    b.node("K", kBinary, {}, k).node("C", kBinary, {}, {{0.936, 0.064}});
    ci = {{"flood losses ignore construction", {"C"}, {"K"}, {}, true}};
  } else if (variant == "direct") {
    b.node("K", kBinary, {}, k).node("C", kBinary, {"K"}, {{0.956, 0.044}, {0.916, 0.084}});
    ci = {{"fire losses depend on construction", {"C"}, {"K"}, {}, false}};
  } else if (variant == "collider") {
    b.node("K", kBinary, {}, k).node("D", kBinary, {}, {{0.45, 0.55}}).node("C", kBinary, {"K", "D"});
    ci = {{"construction and alarm unrelated", {"K"}, {"D"}, {}, true},
          {"claims couple construction and alarm", {"K"}, {"D"}, {"C"}, false},
          {"claims depend on construction given alarm", {"C"}, {"K"}, {"D"}, false}};
  } else if (variant == "chain") {
    b.node("K", kBinary, {}, k)
        .node("D", kBinary, {"K"}, {{0.7, 0.3}, {0.2, 0.8}})
        .node("C", kBinary, {"D"}, {{0.98, 0.02}, {0.9, 0.1}});
    ci = {{"claims independent of construction given alarm", {"C"}, {"K"}, {"D"}, true},
          {"construction predicts claims through the alarm", {"C"}, {"K"}, {}, false}};
  } else {
    throw Error(errc::kNotFound, "no variant " + variant, "fig2_fig3_home");
  }
  auto e = entry("fig2_fig3_home:" + variant, "Home property claims (" + variant + ")", {"2", "3", "4"},
                 b.build());
  e.ci_assertions = std::move(ci);
  e.queries = {{"claims_prior", "Chance of a claim with no evidence", {"C"}, {}},
               {"claims_given_class", "Claims for non-combustible construction", {"C"}, {{"K", "1"}}},
               {"class_given_claim", "Reverse update of construction from a claim", {"K"}, {{"C", "1"}}}};
  return e;
}

NetBuilder freq_severity_builder(bool n_to_s) {
  NetBuilder b(501);
  b.meta()["description"] = "Rating factors X1, X2 drive claim count N and average severity S.";
  b.meta()["numeric_values"] = {{"N", {0, 1, 2, 3}}, {"S", {500, 2000, 8000}}};
  b.node("X1", {"a", "b"}).node("X2", {"low", "high"}).node("N", {"0", "1", "2", "3"}, {"X1", "X2"});
  if (n_to_s) {
    b.node("S", {"500", "2000", "8000"}, {"X1", "X2", "N"});
  } else {
    b.node("S", {"500", "2000", "8000"}, {"X1", "X2"});
  }
  return b;
}

CatalogEntry freq_severity() {
  auto e = entry("fig5_freq_severity", "Frequency and severity", {"5"}, freq_severity_builder(false).build());
  e.ci_assertions = {{"severity independent of frequency given both factors", {"S"}, {"N"}, {"X1", "X2"}, true},
                     {"one factor alone does not separate", {"S"}, {"N"}, {"X1"}, false},
                     {"the other factor alone does not separate", {"S"}, {"N"}, {"X2"}, false}};
  e.queries = {{"severity_given_count", "Severity after observing three claims", {"S"}, {{"N", "3"}}}};
  return e;
}

CatalogEntry glm(const std::string& variant) {
  NetBuilder b(601);
  b.meta()["description"] = "Outcome Y with explanatory X1, X2, X3.";
  std::vector<CatalogCi> ci;
  if (variant == "independent") {
    b.node("X1", kBinary).node("X2", kBinary).node("X3", kBinary).node("Y", kBinary, {"X1", "X2", "X3"});
    ci = {{"X1 independent of the others", {"X1"}, {"X2", "X3"}, {}, true},
          {"X2 independent of X3", {"X2"}, {"X3"}, {}, true},
          {"conditioning on Y couples X1 and X2", {"X1"}, {"X2"}, {"Y"}, false}};
  } else if (variant == "correlated") {
    b.node("X1", kBinary).node("X3", kBinary).node("X2", kBinary, {"X3"}).node("Y", kBinary, {"X1", "X2"});
    ci = {{"X3 redundant given X2", {"Y"}, {"X3"}, {"X2"}, true},
          {"X3 correlated with X2", {"X3"}, {"X2"}, {}, false},
          {"X3 predictive without X2", {"Y"}, {"X3"}, {}, false}};
  } else {
    throw Error(errc::kNotFound, "no variant " + variant, "fig6_glm");
  }
  auto e = entry("fig6_glm:" + variant, "Generalized linear model predictors (" + variant + ")", {"6"},
                 b.build());
  e.ci_assertions = std::move(ci);
  e.queries = {{"outcome_given_x3", "Outcome when X3 is high", {"Y"}, {{"X3", "1"}}}};
  return e;
}

CatalogEntry summary_score() {
  NetBuilder b(701);
  b.meta()["description"] = "Score S summarizes X2 and X3 for outcome Y.";
  b.node("X1", kBinary)
      .node("X2", kBinary)
      .node("X3", kBinary)
      .node("S", {"low", "mid", "high"}, {"X2", "X3"})
      .node("Y", kBinary, {"S", "X1"});
  auto e = entry("fig7_summary_score", "Summary score", {"7"}, b.build());
  e.ci_assertions = {{"valid summary score", {"Y"}, {"X2", "X3"}, {"S"}, true},
                     {"omitted variables predictive without the score", {"Y"}, {"X2", "X3"}, {}, false}};
  e.queries = {{"outcome_given_score", "Outcome for a high score", {"Y"}, {{"S", "high"}}}};
  return e;
}

CatalogEntry stochastic_bf() {
  NetBuilder b(801);
  b.meta()["description"] =
      "Reserving parameters discretized to 5 bins; alpha, beta hyper-parameters of the row parameter phi, "
      "column parameter tau, dispersion psi, ultimate losses C.";
  b.meta()["bin_edges"] = {{"alpha", {0.0, 0.5, 1.0, 1.5, 2.0, 2.5}},
                           {"beta", {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}},
                           {"phi", {0.0, 0.4, 0.8, 1.2, 1.6, 2.0}},
                           {"tau", {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}},
                           {"psi", {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}},
                           {"C", {0.0, 200.0, 400.0, 600.0, 800.0, 1000.0}}};
  b.node("alpha", bins(5))
      .node("beta", bins(5))
      .node("phi", bins(5), {"alpha", "beta"})
      .node("tau", bins(5))
      .node("psi", bins(5))
      .node("C", bins(5), {"phi", "tau", "psi"});
  auto e = entry("fig8_stoch_bf", "Stochastic Bornhuetter-Ferguson reserving", {"8"}, b.build());
  e.ci_assertions = {{"losses ignore hyper-parameters given parameters", {"C"}, {"alpha", "beta"},
                      {"phi", "tau", "psi"}, true},
                     {"row parameters independent of column parameters", {"phi", "alpha", "beta"}, {"tau"}, {}, true},
                     {"row parameters independent of dispersion", {"phi", "alpha", "beta"}, {"psi"}, {}, true},
                     {"column parameters independent of dispersion", {"tau"}, {"psi"}, {}, true},
                     {"hyper-parameters inform losses marginally", {"C"}, {"alpha"}, {}, false}};
  e.queries = {{"losses_given_prior", "Losses under a high a priori row level", {"C"}, {{"alpha", "b5"}}}};
  return e;
}

CatalogEntry capital() {
  NetBuilder b(901);
  b.meta()["description"] =
      "Capital model: interest rate T, cost inflation F, bond index B, attritional losses W, market "
      "softness Y, equity index Q, catastrophe H, reinsurer default R, liabilities L, assets A.";
  b.meta()["capital"] = {{"assets", {{"A", {80, 100, 120}}}}, {"liabilities", {{"L", {40, 60, 90}}}}};
  const std::vector<std::string> lmh{"low", "mid", "high"};
  // Liabilities: high mass grows with default, catastrophe and attritional losses.
  std::vector<std::vector<double>> l_rows;
  for (int r = 0; r < 2; ++r) {
    for (int h = 0; h < 2; ++h) {
      for (int w = 0; w < 2; ++w) {
        const double high = 0.05 + 0.1 * r + 0.4 * h + 0.05 * w;
        l_rows.push_back({round4(0.7 - high), 0.3, round4(high)});
      }
    }
  }
  b.node("T", kBinary)
      .node("F", kBinary, {"T"})
      .node("Y", kBinary, {"T"})
      .node("B", kBinary, {"T"})
      .node("W", kBinary, {"F"})
      .node("Q", kBinary, {"F"})
      .node("H", kBinary, {}, {{0.95, 0.05}})
      .node("R", kBinary, {"Y"})
      .node("L", lmh, {"R", "H", "W"}, l_rows)
      .node("A", lmh, {"B", "Q"});
  auto e = entry("fig9_capital", "Capital model risk factors", {"9"}, b.build());
  e.ci_assertions = {{"interest rates reach assets only via bonds and inflation", {"A"}, {"T"}, {"B", "F"}, true},
                     {"catastrophe has no parents", {"H"}, {"T", "F", "Y", "B", "W", "Q"}, {}, true},
                     {"interest rates move assets", {"A"}, {"T"}, {}, false},
                     {"catastrophe moves liabilities", {"L"}, {"H"}, {}, false}};
  e.queries = {{"catastrophe", "Liabilities and assets after a catastrophe", {"L", "A"}, {{"H", "1"}}},
               {"catastrophe_and_default", "Catastrophe with reinsurer default", {"L", "A"}, {{"H", "1"}, {"R", "1"}}}};
  return e;
}

constexpr double kStay = 0.7;
constexpr const char* kPersistence =
    "hidden-to-hidden and hidden-to-emission links copy the parent state with probability 0.7, "
    "otherwise follow a generic row";

void sensor_nodes(NetBuilder& b, const std::vector<std::string>& extra_c_parents) {
  b.node("G", kBinary, {}, {{0.4, 0.6}})
      .node("L", kBinary, {"G"}, {{0.8, 0.2}, {0.4, 0.6}})
      .node("S", kBinary, {"L"}, {{0.97, 0.03}, {0.95, 0.05}})
      .node("T", kBinary, {"S", "L"}, {{0.95, 0.05}, {0.97, 0.03}, {0.2, 0.8}, {0.5, 0.5}});
  std::vector<std::string> parents{"G", "S"};
  if (extra_c_parents.empty()) {
    // Claims need smoke; an empty house (G=0) makes them likelier.
    b.node("C", kBinary, parents, {{0.9998, 0.0002}, {0.6, 0.4}, {0.9998, 0.0002}, {0.85, 0.15}});
  } else {
    parents.insert(parents.end(), extra_c_parents.begin(), extra_c_parents.end());
    b.node("C", kBinary, parents);
  }
}

CatalogEntry sensor_home() {
  NetBuilder b(1001);
  b.meta()["description"] = "Claim C, temperature T, smoke S, kitchen lights L, car in garage G.";
  sensor_nodes(b, {});
  auto e = entry("fig10_sensor_home", "Home sensor claim alert", {"10"}, b.build());
  e.ci_assertions = {{"temperature ignores the garage given smoke and lights", {"T"}, {"G"}, {"S", "L"}, true},
                     {"garage informs temperature marginally", {"T"}, {"G"}, {}, false}};
  e.queries = {{"smoke_home", "Claim chance with smoke and the car home", {"C"}, {{"S", "1"}, {"G", "1"}}},
               {"infer_smoke", "Smoke from a hot reading without the alarm", {"S"}, {{"T", "1"}}}};
  return e;
}

CatalogEntry dynamic_claims(const std::string& variant) {
  NetBuilder b(1101);
  b.meta()["description"] = "Time-constant risk K with per-tick fire claims C.";
  b.node("K", kBinary, {}, {{0.5, 0.5}}).node("C", kBinary, {"K"}, {{0.95, 0.05}, {0.8, 0.2}});
  std::vector<std::pair<std::string, std::string>> inter;
  std::vector<DynamicNet::TransitionSpec> transitions;
  if (variant == "autoregressive") {
    inter = {{"C", "C"}};
    transitions = {{"C", {"K", "C@prev"}, {{0.96, 0.04}, {0.85, 0.15}, {0.82, 0.18}, {0.6, 0.4}}}};
  } else if (variant != "plain") {
    throw Error(errc::kNotFound, "no variant " + variant, "fig11_dynamic_claims");
  }
  auto e = dynamic_entry("fig11_dynamic_claims:" + variant, "Dynamic claims (" + variant + ")", {"11"},
                         DynamicNet(b.build(), {"C"}, inter, transitions));
  if (variant == "plain") {
    e.ci_assertions = {{"claims exchangeable given K", {"C_1"}, {"C_3"}, {"K"}, true},
                       {"claim history informs future claims", {"C_1"}, {"C_3"}, {}, false}};
  } else {
    e.ci_assertions = {{"only the last claim matters given K", {"C_3"}, {"C_1"}, {"K", "C_2"}, true},
                       {"past claims matter beyond K", {"C_2"}, {"C_1"}, {"K"}, false}};
  }
  e.queries = {{"after_claim", "Risk after a first-tick claim", {"K"}, {{"C_1", "1"}}}};
  return e;
}

CatalogEntry smart_home() {
  NetBuilder b(1201);
  b.meta()["description"] =
      "Static income I, year built Y, construction K, protection P, flood score F, crime score M; "
      "per-tick burglar alarm B, weather W and the home sensor network sharing claim C.";
  b.node("I", kBinary)
      .node("Y", kBinary)
      .node("K", kBinary, {"I", "Y"})
      .node("P", kBinary, {"I"})
      .node("F", kBinary, {"Y"})
      .node("M", kBinary)
      .node("W", kBinary);
  b.meta()["fixture"]["persistence"] = "the burglar alarm B copies the crime score M with probability 0.7";
  b.node("B", kBinary, {"M"}, b.persistent_rows(2, kStay));
  sensor_nodes(b, {"P", "K", "F", "M", "W"});
  auto e = dynamic_entry("fig12_smart_home", "Claims with static and dynamic inputs", {"12"},
                         DynamicNet(b.build(), {"B", "W", "G", "L", "S", "T", "C"}, {}, {}));
  e.ci_assertions = {{"claims and burglar alarm related only via crime score", {"C_1"}, {"B_1"}, {"M"}, true},
                     {"same at a later tick", {"C_3"}, {"B_3"}, {"M"}, true},
                     {"alarm informs claims marginally", {"C_1"}, {"B_1"}, {}, false}};
  e.queries = {{"alarm", "Claim chance after a burglar alarm", {"C_1"}, {{"B_1", "1"}}}};
  return e;
}

CatalogEntry climate_tree() {
  NetBuilder b(1301);
  b.meta()["description"] =
      "Hidden annual, biannual, quarterly and monthly climate factors above 12 monthly claim indicators.";
  b.meta()["fixture"]["persistence"] = kPersistence;
  b.node("A", kBinary);
  for (int h = 1; h <= 2; ++h) b.node("H" + std::to_string(h), kBinary, {"A"}, b.persistent_rows(2, kStay));
  for (int q = 1; q <= 4; ++q) {
    b.node("Q" + std::to_string(q), kBinary, {"H" + std::to_string((q + 1) / 2)}, b.persistent_rows(2, kStay));
  }
  for (int m = 1; m <= 12; ++m) {
    b.node("M" + std::to_string(m), kBinary, {"Q" + std::to_string((m + 2) / 3)}, b.persistent_rows(2, kStay));
  }
  for (int m = 1; m <= 12; ++m) {
    b.node("C" + std::to_string(m), kBinary, {"M" + std::to_string(m)}, b.persistent_rows(2, kStay));
  }
  auto e = entry("fig13_tree", "Hidden climate hierarchy", {"13-left"}, b.build());
  e.ci_assertions = {{"months independent given their hidden month", {"C1"}, {"C2"}, {"M1"}, true},
                     {"distant months independent given the annual factor", {"C1"}, {"C12"}, {"A"}, true},
                     {"distant months related marginally", {"C1"}, {"C12"}, {}, false}};
  e.queries = {{"wet_spring", "December claims after March and April claims", {"C12"}, {{"C3", "1"}, {"C4", "1"}}}};
  return e;
}

CatalogEntry emission() {
  NetBuilder b(1302);
  b.meta()["description"] = "Hidden occupancy O chain emitting smoke/fire F and claims C each tick.";
  b.meta()["fixture"]["persistence"] = kPersistence;
  // Claims track fire strongly and occupancy moderately.
  b.node("O", kBinary)
      .node("F", kBinary, {"O"}, b.persistent_rows(2, kStay))
      .node("C", kBinary, {"O", "F"}, {{0.95, 0.05}, {0.4, 0.6}, {0.7, 0.3}, {0.15, 0.85}});
  const auto rows = b.persistent_rows(2, kStay);
  auto e = dynamic_entry("fig13_emission", "Occupancy emission model", {"13-right"},
                         DynamicNet(b.build(), {"O", "F", "C"}, {{"O", "O"}}, {{"O", {"O@prev"}, rows}}));
  e.ci_assertions = {{"occupancy chain separates ticks", {"C_1"}, {"C_3"}, {"O_2"}, true},
                     {"claims related across ticks", {"C_1"}, {"C_3"}, {}, false},
                     {"smoke does not block the chain", {"C_1"}, {"C_3"}, {"F_2"}, false}};
  e.queries = {{"fire_signal", "Claim at tick 2 after fire at tick 1", {"C_2"}, {{"F_1", "1"}}}};
  return e;
}

struct Base {
  std::string id;
  std::vector<std::string> variants;  // first is the default
  std::function<CatalogEntry(const std::string&)> make;
};

const std::vector<Base>& bases() {
  static const std::vector<Base> all{
      {"fig1_commercial_auto", {}, [](const std::string&) { return commercial_auto(); }},
      {"fig2_fig3_home", {"chain", "independent", "direct", "collider"}, home},
      {"fig5_freq_severity", {}, [](const std::string&) { return freq_severity(); }},
      {"fig6_glm", {"correlated", "independent"}, glm},
      {"fig7_summary_score", {}, [](const std::string&) { return summary_score(); }},
      {"fig8_stoch_bf", {}, [](const std::string&) { return stochastic_bf(); }},
      {"fig9_capital", {}, [](const std::string&) { return capital(); }},
      {"fig10_sensor_home", {}, [](const std::string&) { return sensor_home(); }},
      {"fig11_dynamic_claims", {"plain", "autoregressive"}, dynamic_claims},
      {"fig12_smart_home", {}, [](const std::string&) { return smart_home(); }},
      {"fig13_tree", {}, [](const std::string&) { return climate_tree(); }},
      {"fig13_emission", {}, [](const std::string&) { return emission(); }},
  };
  return all;
}

}  // namespace

CiStatement CatalogCi::resolve(const BayesNet& net) const {
  return {net.resolve(x), net.resolve(y), net.resolve(z), expected};
}

const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& b : bases()) {
      if (b.variants.empty()) out.push_back(b.id);
      for (const auto& v : b.variants) out.push_back(b.id + ":" + v);
    }
    return out;
  }();
  return ids;
}

CatalogEntry build_entry(const std::string& id) {
  const auto colon = id.find(':');
  const std::string base = id.substr(0, colon);
  for (const auto& b : bases()) {
    if (b.id != base) continue;
    if (colon == std::string::npos) return b.make(b.variants.empty() ? "" : b.variants.front());
    const std::string variant = id.substr(colon + 1);
    if (std::find(b.variants.begin(), b.variants.end(), variant) == b.variants.end()) {
      throw Error(errc::kNotFound, "no catalog entry " + id, id);
    }
    return b.make(variant);
  }
  throw Error(errc::kNotFound, "no catalog entry " + id, id);
}

std::string fixture_file(const std::string& id) {
  std::string f = id;
  std::replace(f.begin(), f.end(), ':', '.');
  return f + ".json";
}

std::string fixture_text(const CatalogEntry& entry) {
  return entry.dynamic ? save_dynamic(*entry.dynamic) : save_network(entry.net);
}

nlohmann::json catalog_manifest() {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& id : catalog_ids()) {
    const CatalogEntry e = build_entry(id);
    entries.push_back({{"id", id},
                       {"base", id.substr(0, id.find(':'))},
                       {"file", fixture_file(id)},
                       {"figures", e.figures},
                       {"kind", e.is_dynamic() ? "dynamic" : "static"},
                       {"title", e.title}});
  }
  return {{"version", 1}, {"entries", entries}};
}

namespace {

std::vector<double> numeric_values(const BayesNet& net, const std::string& name) {
  const auto& meta = net.meta();
  if (!meta.contains("numeric_values") || !meta["numeric_values"].contains(name)) {
    throw Error(errc::kInvalidArgument, "no numeric values for " + name, name);
  }
  auto values = meta["numeric_values"][name].get<std::vector<double>>();
  if (values.size() != net.variable(net.index_of(name)).cardinality()) {
    throw Error(errc::kCardinalityMismatch, "numeric values do not match the states", name);
  }
  return values;
}

}  // namespace

FreqSevReport verify_frequency_severity(const BayesNet& net, double tol) {
  const NodeId x1 = net.index_of("X1");
  const NodeId x2 = net.index_of("X2");
  const NodeId n = net.index_of("N");
  const NodeId s = net.index_of("S");
  const auto nv = numeric_values(net, "N");
  const auto sv = numeric_values(net, "S");
  const Factor joint = permute(eliminate(net, make_node_set({x1, x2, n, s}), {}).joint, {x1, x2, n, s});
  const std::size_t c1 = net.variable(x1).cardinality();
  const std::size_t c2 = net.variable(x2).cardinality();
  const std::size_t cn = nv.size();
  const std::size_t cs = sv.size();
  const auto& p = joint.values();
  const auto at = [&](std::size_t a, std::size_t b, std::size_t i, std::size_t j) {
    return p[((a * c2 + b) * cn + i) * cs + j];
  };

  FreqSevReport r;
  for (std::size_t a = 0; a < c1; ++a) {
    for (std::size_t b = 0; b < c2; ++b) {
      double px = 0.0;
      double ec = 0.0;
      double en = 0.0;
      double es = 0.0;
      std::vector<double> pn(cn, 0.0);
      std::vector<double> esn(cn, 0.0);
      for (std::size_t i = 0; i < cn; ++i) {
        for (std::size_t j = 0; j < cs; ++j) {
          const double w = at(a, b, i, j);
          px += w;
          pn[i] += w;
          esn[i] += w * sv[j];
          ec += w * nv[i] * sv[j];
          en += w * nv[i];
          es += w * sv[j];
        }
      }
      r.expected_claims += ec;
      r.expected_frequency += en;
      r.expected_severity += es;
      if (!(px > 0.0)) continue;
      ec /= px;
      en /= px;
      es /= px;
      double iterated = 0.0;
      for (std::size_t i = 0; i < cn; ++i) {
        if (!(pn[i] > 0.0)) continue;
        const double cond = esn[i] / pn[i];
        iterated += pn[i] / px * nv[i] * cond;
        r.gap_severity = std::max(r.gap_severity, std::abs(cond - es) / std::max(1.0, std::abs(es)));
      }
      r.gap_iterated = std::max(r.gap_iterated, std::abs(ec - iterated) / std::max(1.0, std::abs(ec)));
      r.gap_product = std::max(r.gap_product, std::abs(ec - en * es) / std::max(1.0, std::abs(ec)));
    }
  }
  r.iterated_pass = r.gap_iterated <= tol;
  r.severity_pass = r.gap_severity <= tol;
  return r;
}

BayesNet freq_severity_dependent() {
  NetBuilder b = freq_severity_builder(true);
  b.meta()["description"] = "Frequency-severity variant where severity also depends on the claim count.";
  return b.build();
}

BayesNet freq_severity_single_claim() {
  NetBuilder b = freq_severity_builder(false);
  b.meta()["description"] = "Frequency-severity variant with exactly one claim.";
  for (auto& cpt : b.doc().cpts) {
    if (cpt.child == "N") {
      for (auto& row : cpt.rows) row = {0.0, 1.0, 0.0, 0.0};
    }
  }
  return b.build();
}

CapitalReport capital_whatif(const BayesNet& net, const Evidence& scenario, double quantile) {
  if (!(quantile >= 0.0 && quantile <= 1.0)) {
    throw Error(errc::kInvalidArgument, "quantile must lie in [0, 1]");
  }
  const auto& meta = net.meta();
  if (!meta.contains("capital")) throw Error(errc::kInvalidArgument, "network has no capital map");
  const auto& assets = meta["capital"]["assets"];
  const auto& liabilities = meta["capital"]["liabilities"];
  const std::string a_name = assets.begin().key();
  const std::string l_name = liabilities.begin().key();
  const auto av = assets.begin().value().get<std::vector<double>>();
  const auto lv = liabilities.begin().value().get<std::vector<double>>();
  const NodeId a = net.index_of(a_name);
  const NodeId l = net.index_of(l_name);
  if (av.size() != net.variable(a).cardinality() || lv.size() != net.variable(l).cardinality()) {
    throw Error(errc::kCardinalityMismatch, "capital map does not match the states");
  }

  const Factor joint = permute(eliminate(net, make_node_set({a, l}), scenario).joint, {a, l});
  CapitalReport r;
  r.assets.assign(av.size(), 0.0);
  r.liabilities.assign(lv.size(), 0.0);
  std::map<double, double> capital;
  for (std::size_t i = 0; i < av.size(); ++i) {
    for (std::size_t j = 0; j < lv.size(); ++j) {
      const double w = joint.values()[i * lv.size() + j];
      r.assets[i] += w;
      r.liabilities[j] += w;
      capital[av[i] - lv[j]] += w;
    }
  }
  r.capital.assign(capital.begin(), capital.end());
  double acc = 0.0;
  r.quantile = r.capital.back().first;
  for (const auto& [value, prob] : r.capital) {
    acc += prob;
    if (prob > 0.0 && acc >= quantile - 1e-12) {
      r.quantile = value;
      break;
    }
  }
  return r;
}

std::vector<AnomalyFlag> anomaly_screen(const BayesNet& net, const Evidence& observed,
                                        const Evidence& reported, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(errc::kInvalidArgument, "threshold must lie in [0, 1]");
  }
  std::vector<AnomalyFlag> out;
  for (const auto& [v, item] : reported.items()) {
    if (observed.contains(v)) {
      throw Error(errc::kOverlappingSets, "variable is both observed and reported", net.variable(v).name);
    }
    const auto* hard = std::get_if<HardEvidence>(&item);
    if (!hard) throw Error(errc::kInvalidArgument, "reported values must be hard evidence", net.variable(v).name);
    if (hard->state >= net.variable(v).cardinality()) {
      throw Error(errc::kStateOutOfRange, "reported state out of range", net.variable(v).name);
    }
  }
  for (const auto& [v, item] : reported.items()) {
    const Posterior post = eliminate(net, {v}, observed);
    AnomalyFlag f;
    f.var = v;
    f.reported_state = std::get<HardEvidence>(item).state;
    f.posterior = post.joint.values()[f.reported_state];
    f.flagged = f.posterior < threshold;
    out.push_back(f);
  }
  return out;
}

}  // namespace riskgraph
