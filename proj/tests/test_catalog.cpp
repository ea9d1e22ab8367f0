#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "riskgraph/catalog.hpp"
#include "riskgraph/error.hpp"
#include "riskgraph/exact.hpp"
#include "riskgraph/io.hpp"
#include "support.hpp"

using namespace riskgraph;

namespace {

const std::string kFixtureDir = "fixtures/v1/";

Evidence hard(const BayesNet& net, const std::map<std::string, std::string>& items) {
  Evidence ev;
  for (const auto& [name, state] : items) {
    const NodeId v = net.index_of(name);
    ev.set_hard(v, net.variable(v).state_index(state));
  }
  return ev;
}

}  // namespace

TEST_CASE("every id builds a valid entry") {
  CHECK(catalog_ids().size() == 17);
  for (const auto& id : catalog_ids()) {
    CAPTURE(id);
    const CatalogEntry e = build_entry(id);
    CHECK(e.id == id);
    CHECK(validate(e.net.to_document()).empty());
    CHECK_FALSE(e.ci_assertions.empty());
    CHECK_FALSE(e.queries.empty());
    for (const auto& q : e.queries) {
      CHECK_NOTHROW(eliminate(e.net, e.net.resolve(q.targets), hard(e.net, q.evidence)));
    }
  }
  CHECK(build_entry("fig2_fig3_home").id == "fig2_fig3_home:chain");
  CHECK_THROWS_AS(build_entry("fig4"), Error);
  CHECK_THROWS_AS(build_entry("fig2_fig3_home:loop"), Error);
}

TEST_CASE("figure shapes") {
  const auto fig1 = build_entry("fig1_commercial_auto");
  CHECK(fig1.net.size() == 4);
  CHECK(fig1.net.dag().edge_count() == 3);

  const auto tree = build_entry("fig13_tree");
  CHECK(tree.net.size() == 31);  // 1 + 2 + 4 + 12 hidden, 12 observed
  CHECK(is_polytree(tree.net.dag()));
  CHECK(tree.net.dag().edge_count() == 30);

  const auto capital = build_entry("fig9_capital");
  CHECK(capital.net.size() == 10);
  CHECK(capital.net.dag().edge_count() == 11);
  CHECK_FALSE(capital.net.dag().has_edge(capital.net.index_of("T"), capital.net.index_of("A")));

  const auto sensors = build_entry("fig10_sensor_home");
  const auto& d = sensors.net.dag();
  const auto id = [&](const char* n) { return sensors.net.index_of(n); };
  CHECK(d.edge_count() == 6);
  for (const auto& [a, b] : std::vector<std::pair<const char*, const char*>>{
           {"G", "C"}, {"G", "L"}, {"S", "C"}, {"S", "T"}, {"L", "T"}, {"L", "S"}}) {
    CHECK(d.has_edge(id(a), id(b)));
  }

  const auto smart = build_entry("fig12_smart_home");
  REQUIRE(smart.dynamic);
  CHECK(smart.dynamic->static_nodes().size() == 6);
  CHECK(smart.dynamic->slice_nodes().size() == 7);

  const auto ar = build_entry("fig11_dynamic_claims:autoregressive");
  CHECK(ar.dynamic->carried_nodes().size() == 2);
  CHECK(build_entry("fig11_dynamic_claims:plain").dynamic->carried_nodes().size() == 1);
}

TEST_CASE("manifest covers every figure exactly once") {
  const auto manifest = catalog_manifest();
  std::map<std::string, std::set<std::string>> owners;
  for (const auto& e : manifest["entries"]) {
    for (const auto& f : e["figures"]) owners[f.get<std::string>()].insert(e["base"].get<std::string>());
  }
  std::set<std::string> want{"1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13-left", "13-right"};
  std::set<std::string> got;
  for (const auto& [fig, bases] : owners) {
    got.insert(fig);
    CHECK_MESSAGE(bases.size() == 1, fig);
  }
  CHECK(got == want);
}

TEST_CASE("fixtures match the builders and round-trip") {
  for (const auto& id : catalog_ids()) {
    CAPTURE(id);
    const std::string path = kFixtureDir + fixture_file(id);
    REQUIRE(std::filesystem::exists(path));
    const std::string text = read_file(path);
    const CatalogEntry e = build_entry(id);
    CHECK(text == fixture_text(e));
    if (e.dynamic) {
      CHECK(save_dynamic(load_dynamic(text)) == text);
    } else {
      CHECK(save_network(load_network(text)) == text);
    }
  }
  CHECK(read_file(kFixtureDir + "manifest.json") == catalog_manifest().dump(2) + "\n");
}

TEST_CASE("catalog CI assertions hold structurally and numerically") {
  for (const auto& id : catalog_ids()) {
    const CatalogEntry e = build_entry(id);
    for (const auto& ci : e.ci_assertions) {
      CAPTURE(id);
      CAPTURE(ci.label);
      const CiStatement s = ci.resolve(e.net);
      CHECK(d_separated(e.net.dag(), s.x, s.y, s.z) == ci.expected);
      const double gap = ci_gap_exact(e.net, s);
      if (ci.expected) {
        CHECK(gap <= 1e-9);
        if (e.net.state_space() <= kDefaultEnumerationCap) CHECK(check_ci_numeric(e.net, s, 1e-9));
      } else {
        CHECK(gap > 1e-3);
      }
    }
  }
}

TEST_CASE("desk values on the home chain") {
  const BayesNet net = build_entry("fig2_fig3_home:chain").net;
  const NodeId k = net.index_of("K");
  const NodeId c = net.index_of("C");
  CHECK(std::abs(eliminate(net, {c}, {}).joint.values()[1] - 0.064) < 1e-12);
  CHECK(std::abs(eliminate(net, {c}, hard(net, {{"K", "1"}})).joint.values()[1] - 0.084) < 1e-12);
  CHECK(std::abs(eliminate(net, {k}, hard(net, {{"C", "1"}})).joint.values()[1] - 0.65625) < 1e-12);
  // The direct variant carries the chain's P(C|K), so both give the same update.
  const BayesNet direct = build_entry("fig2_fig3_home:direct").net;
  CHECK(std::abs(eliminate(direct, {direct.index_of("C")}, hard(direct, {{"K", "1"}})).joint.values()[1] -
                 0.084) < 1e-12);
  const BayesNet indep = build_entry("fig2_fig3_home:independent").net;
  const auto before = eliminate(indep, {indep.index_of("C")}, {}).joint.values();
  const auto after = eliminate(indep, {indep.index_of("C")}, hard(indep, {{"K", "1"}})).joint.values();
  CHECK(testsupport::max_diff(before, after) < 1e-15);
}

TEST_CASE("frequency-severity factorization") {
  const BayesNet net = build_entry("fig5_freq_severity").net;
  const FreqSevReport r = verify_frequency_severity(net, 1e-9);
  CHECK(r.iterated_pass);
  CHECK(r.severity_pass);
  CHECK(r.gap_product <= 1e-9);

  // E(C) by direct enumeration.
  const std::vector<NodeId> scope{net.index_of("N"), net.index_of("S")};
  const auto joint = testsupport::oracle_joint_over(net, {}, scope);
  const std::vector<double> nv{0, 1, 2, 3};
  const std::vector<double> sv{500, 2000, 8000};
  double ec = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) ec += joint[i * 3 + j] * nv[i] * sv[j];
  }
  CHECK(std::abs(r.expected_claims - ec) < 1e-9 * ec);

  const FreqSevReport dep = verify_frequency_severity(freq_severity_dependent(), 1e-9);
  CHECK(dep.iterated_pass);
  CHECK_FALSE(dep.severity_pass);
  CHECK(dep.gap_severity > 0.01);

  const FreqSevReport one = verify_frequency_severity(freq_severity_single_claim(), 1e-9);
  CHECK(one.expected_claims == one.expected_severity);
}

TEST_CASE("capital what-if") {
  const BayesNet net = build_entry("fig9_capital").net;
  const NodeId l = net.index_of("L");
  const NodeId a = net.index_of("A");
  const CapitalReport prior = capital_whatif(net, {}, 0.05);
  const auto oracle = testsupport::oracle_marginals(net, {});
  CHECK(testsupport::max_diff(prior.liabilities, oracle[l]) < 1e-12);
  CHECK(testsupport::max_diff(prior.assets, oracle[a]) < 1e-12);

  const Evidence cat = hard(net, {{"H", "1"}});
  const CapitalReport hit = capital_whatif(net, cat, 0.05);
  CHECK(hit.liabilities[2] > prior.liabilities[2]);
  const auto oracle_hit = testsupport::oracle_marginals(net, cat);
  CHECK(testsupport::max_diff(hit.liabilities, oracle_hit[l]) < 1e-12);
  CHECK(testsupport::max_diff(hit.assets, oracle_hit[a]) < 1e-12);
  CHECK(hit.quantile <= prior.quantile);

  const Evidence both = hard(net, {{"H", "1"}, {"R", "1"}});
  const CapitalReport joint = capital_whatif(net, both, 0.5);
  const auto oracle_both = testsupport::oracle_marginals(net, both);
  CHECK(testsupport::max_diff(joint.liabilities, oracle_both[l]) < 1e-12);

  // Capital distribution from the oracle joint of (A, L).
  const auto al = testsupport::oracle_joint_over(net, cat, {a, l});
  const std::vector<double> av{80, 100, 120};
  const std::vector<double> lv{40, 60, 90};
  std::map<double, double> cap;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) cap[av[i] - lv[j]] += al[i * 3 + j];
  }
  REQUIRE(hit.capital.size() == cap.size());
  std::size_t i = 0;
  double acc = 0.0;
  double q05 = 0.0;
  bool found = false;
  for (const auto& [value, prob] : cap) {
    CHECK(hit.capital[i].first == value);
    CHECK(std::abs(hit.capital[i].second - prob) < 1e-12);
    acc += prob;
    if (!found && acc >= 0.05) {
      q05 = value;
      found = true;
    }
    ++i;
  }
  CHECK(hit.quantile == q05);
  CHECK_THROWS_AS(capital_whatif(net, {}, 1.5), Error);
}

TEST_CASE("sensor home updates and anomaly screen") {
  const BayesNet net = build_entry("fig10_sensor_home").net;
  const NodeId c = net.index_of("C");
  const NodeId s = net.index_of("S");
  const double prior = testsupport::oracle_marginals(net, {})[c][1];
  const Evidence sg = hard(net, {{"S", "1"}, {"G", "1"}});
  const double updated = eliminate(net, {c}, sg).joint.values()[1];
  CHECK(updated > prior);
  CHECK(std::abs(updated - testsupport::oracle_marginals(net, sg)[c][1]) < 1e-12);

  const Evidence claims = hard(net, {{"C", "1"}});
  const Evidence no_smoke = hard(net, {{"S", "0"}});
  const auto flags = anomaly_screen(net, claims, no_smoke);
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].var == s);
  CHECK(flags[0].flagged);
  CHECK(std::abs(flags[0].posterior - testsupport::oracle_marginals(net, claims)[s][0]) < 1e-12);

  const auto mode = anomaly_screen(net, claims, hard(net, {{"S", "1"}}));
  CHECK_FALSE(mode[0].flagged);
  CHECK_FALSE(anomaly_screen(net, claims, no_smoke, 0.0)[0].flagged);

  CHECK_THROWS_AS(anomaly_screen(net, claims, claims), Error);
  Evidence soft;
  soft.set_soft(s, {0.2, 0.8});
  CHECK_THROWS_AS(anomaly_screen(net, claims, soft), Error);
}

TEST_CASE("capital catastrophe posteriors match the oracle") {
  const BayesNet net = build_entry("fig9_capital").net;
  const Evidence cat = hard(net, {{"H", "1"}});
  const CliqueTree tree = build_junction_tree(net);
  const auto cal = calibrate(tree, cat);
  const auto oracle = testsupport::oracle_marginals(net, cat);
  for (const auto& m : query_marginals(cal, {net.index_of("L"), net.index_of("A")})) {
    CHECK(testsupport::max_diff(m.probs, oracle[m.var]) < 1e-12);
  }
}
