#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "riskgraph/error.hpp"
#include "riskgraph/learning.hpp"
#include "support.hpp"

using namespace riskgraph;

namespace {

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

std::vector<Variable> binary(const std::vector<std::string>& names) {
  std::vector<Variable> vs;
  for (const auto& n : names) vs.push_back({n, {"0", "1"}});
  return vs;
}

// K -> C_1..C_T with a separate table per tick.
BayesNet latent_claims(std::size_t T) {
  NetworkDocument doc;
  doc.variables = binary({"K"});
  doc.cpts.push_back({"K", {}, {{0.4, 0.6}}});
  for (std::size_t t = 1; t <= T; ++t) {
    const std::string c = "C_" + std::to_string(t);
    doc.variables.push_back({c, {"0", "1"}});
    doc.edges.emplace_back("K", c);
    const double lo = 0.05 + 0.01 * static_cast<double>(t);
    const double hi = 0.7 - 0.02 * static_cast<double>(t);
    doc.cpts.push_back({c, {"K"}, {{1 - lo, lo}, {1 - hi, hi}}});
  }
  return BayesNet::from_document(doc);
}

// Latent chain O_t emitting F_t and C_t, with F_t also feeding C_t.
BayesNet emission_chain(std::size_t T) {
  NetworkDocument doc;
  for (std::size_t t = 1; t <= T; ++t) {
    const auto s = std::to_string(t);
    for (const char* v : {"O_", "F_", "C_"}) doc.variables.push_back({v + s, {"0", "1"}});
    if (t == 1) {
      doc.cpts.push_back({"O_1", {}, {{0.7, 0.3}}});
    } else {
      const auto p = "O_" + std::to_string(t - 1);
      doc.edges.emplace_back(p, "O_" + s);
      doc.cpts.push_back({"O_" + s, {p}, {{0.85, 0.15}, {0.25, 0.75}}});
    }
    doc.edges.emplace_back("O_" + s, "F_" + s);
    doc.edges.emplace_back("O_" + s, "C_" + s);
    doc.edges.emplace_back("F_" + s, "C_" + s);
    doc.cpts.push_back({"F_" + s, {"O_" + s}, {{0.9, 0.1}, {0.3, 0.7}}});
    doc.cpts.push_back({"C_" + s, {"O_" + s, "F_" + s}, {{0.95, 0.05}, {0.6, 0.4}, {0.7, 0.3}, {0.2, 0.8}}});
  }
  return BayesNet::from_document(doc);
}

std::vector<std::string> latent_names(const BayesNet& net, const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& v : net.variables()) {
    if (v.name.rfind(prefix, 0) == 0) out.push_back(v.name);
  }
  return out;
}

void check_monotone(const std::vector<double>& trace) {
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
}

bool same_skeleton(const UndirectedGraph& g, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  auto want = edges;
  for (auto& [a, b] : want) {
    if (a > b) std::swap(a, b);
  }
  std::sort(want.begin(), want.end());
  return g.edges() == want;
}

}  // namespace

TEST_CASE("csv parsing and writing") {
  const auto schema = testsupport::desk_chain().variables();
  const std::string text = "K,D,C\n0,1,?\n1,1,0\n";
  const Dataset d = parse_dataset(text, schema);
  REQUIRE(d.size() == 2);
  CHECK(d.rows[0][2] == kMissing);
  CHECK_FALSE(d.complete());
  CHECK(write_dataset(d) == text);

  const Dataset sub = parse_dataset("C,K\n1,0\n", schema);
  CHECK(sub.variables[0].name == "C");
  CHECK(sub.rows[0] == std::vector<std::size_t>{1, 0});

  try {
    parse_dataset("K,D,C\n0,1,0\n0,7,0\n", schema);
    FAIL("bad state accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "ParseError");
    CHECK(e.locus() == "line 3");
  }
  CHECK(code_of([&] { parse_dataset("K,D\n0\n", schema); }) == "ParseError");
  CHECK(code_of([&] { parse_dataset("K,Z\n0,0\n", schema); }) == "ParseError");
  CHECK(code_of([&] { parse_dataset("K,K\n0,0\n", schema); }) == "ParseError");

  const Dataset inferred = parse_dataset("size,kind\nlarge,b\nsmall,?\nlarge,a\n");
  CHECK(inferred.variables[0].states == std::vector<std::string>{"large", "small"});
  CHECK(inferred.variables[1].states == std::vector<std::string>{"a", "b"});
  CHECK(inferred.rows[2] == std::vector<std::size_t>{0, 0});
}

TEST_CASE("forward sampling is seeded and matches the model") {
  const BayesNet net = testsupport::desk_chain();
  const Dataset a = forward_sample(net, 50000, 3);
  CHECK(a.rows == forward_sample(net, 50000, 3).rows);
  CHECK(a.rows != forward_sample(net, 50000, 4).rows);
  double d1 = 0.0;
  double c1 = 0.0;
  for (const auto& r : a.rows) {
    d1 += static_cast<double>(r[1]);
    c1 += static_cast<double>(r[2]);
  }
  CHECK(std::abs(d1 / 50000 - 0.55) < 0.01);
  CHECK(std::abs(c1 / 50000 - 0.064) < 0.005);
}

TEST_CASE("mle recovers the desk chain at n=100000") {
  const BayesNet net = testsupport::desk_chain();
  const Dataset data = forward_sample(net, 100000, 11);
  const BayesNet fit = fit_mle(net.dag(), net.variables(), data);
  for (NodeId v = 0; v < net.size(); ++v) {
    CHECK(testsupport::max_diff(fit.cpt(v).probs, net.cpt(v).probs) < 0.01);
  }
}

TEST_CASE("dirichlet smoothing") {
  const BayesNet net = testsupport::desk_chain();
  Dataset one;
  one.variables = net.variables();
  one.rows = {{1, 0, 1}};
  const BayesNet plain = fit_mle(net.dag(), net.variables(), one);
  CHECK(plain.cpt(0).probs == std::vector<double>{0.0, 1.0});
  // K=0 was never seen: uniform row.
  CHECK(plain.cpt(1).probs == std::vector<double>{0.5, 0.5, 1.0, 0.0});

  const BayesNet smooth = fit_mle(net.dag(), net.variables(), one, DirichletPrior{1.0});
  CHECK(smooth.cpt(0).probs == std::vector<double>{0.25, 0.75});
  CHECK(smooth.cpt(1).probs == std::vector<double>{0.5, 0.5, 0.75, 0.25});
  CHECK(smooth.cpt(2).probs == std::vector<double>{0.25, 0.75, 0.5, 0.5});

  Dataset empty;
  empty.variables = net.variables();
  CHECK(code_of([&] { fit_mle(net.dag(), net.variables(), empty); }) == "EmptyDataset");
  one.rows[0][1] = kMissing;
  CHECK(code_of([&] { fit_mle(net.dag(), net.variables(), one); }) == "InvalidArgument");
}

TEST_CASE("em is monotone on the latent claims model") {
  const BayesNet truth = latent_claims(10);
  const Dataset full = forward_sample(truth, 20000, 21);
  const Dataset data = drop_columns(full, {"K"});
  EmSettings s;
  s.seed = 5;
  const EmResult r = fit_em(truth.dag(), truth.variables(), data, s);
  check_monotone(r.trace);
  CHECK(r.converged);

  // The latent labels may come back swapped.
  const auto& k = r.net.cpt(0).probs;
  const bool swapped = std::abs(k[1] - 0.6) > std::abs(k[0] - 0.6);
  const auto align = [&](std::vector<double> probs, bool row_swap) {
    if (row_swap) std::swap_ranges(probs.begin(), probs.begin() + 2, probs.begin() + 2);
    return probs;
  };
  CHECK(std::abs((swapped ? k[0] : k[1]) - 0.6) < 0.03);
  for (NodeId v = 1; v < truth.size(); ++v) {
    CHECK(testsupport::max_diff(align(r.net.cpt(v).probs, swapped), truth.cpt(v).probs) < 0.03);
  }
}

TEST_CASE("em is monotone on the emission chain") {
  const BayesNet truth = emission_chain(6);
  const Dataset data = drop_columns(forward_sample(truth, 5000, 31), latent_names(truth, "O_"));
  for (std::uint64_t seed : {1, 2, 3}) {
    EmSettings s;
    s.seed = seed;
    s.max_iters = 60;
    const EmResult r = fit_em(truth.dag(), truth.variables(), data, s);
    check_monotone(r.trace);
  }
}

TEST_CASE("em details") {
  const BayesNet truth = latent_claims(4);
  Dataset data = drop_columns(forward_sample(truth, 3000, 41), {"K"});
  data.rows[0][1] = kMissing;
  data.rows[5][0] = kMissing;

  EmSettings par;
  par.max_iters = 15;
  EmSettings ser = par;
  ser.parallel = false;
  const EmResult a = fit_em(truth.dag(), truth.variables(), data, par);
  const EmResult b = fit_em(truth.dag(), truth.variables(), data, ser);
  CHECK(a.trace == b.trace);
  for (NodeId v = 0; v < truth.size(); ++v) CHECK(a.net.cpt(v).probs == b.net.cpt(v).probs);
  check_monotone(a.trace);

  EmSettings none;
  none.max_iters = 0;
  const EmResult z = fit_em(truth.dag(), truth.variables(), data, none);
  CHECK(z.trace.size() == 1);
  CHECK(z.iterations == 0);

  // Fully observed data: EM lands on the MLE after one step.
  const Dataset complete = forward_sample(truth, 2000, 42);
  const EmResult full = fit_em(truth.dag(), truth.variables(), complete);
  const BayesNet mle = fit_mle(truth.dag(), truth.variables(), complete);
  for (NodeId v = 0; v < truth.size(); ++v) {
    CHECK(testsupport::max_diff(full.net.cpt(v).probs, mle.cpt(v).probs) < 1e-12);
  }
}

TEST_CASE("bic") {
  const BayesNet net = testsupport::desk_chain();
  CHECK(free_parameters(net) == 5);
  const Dataset data = forward_sample(net, 4000, 51);
  const BayesNet fit = fit_mle(net.dag(), net.variables(), data);
  const double total = score_bic(fit, data);
  CHECK(std::abs(total - structure_bic(data, net.dag())) < 1e-9 * std::abs(total));

  double by_family = 0.0;
  for (NodeId v = 0; v < net.size(); ++v) by_family += family_bic(data, v, net.dag().parents(v));
  CHECK(std::abs(total - by_family) < 1e-9 * std::abs(total));

  // Hand count for a parentless family.
  double k1 = 0.0;
  for (const auto& r : data.rows) k1 += static_cast<double>(r[0]);
  const double n = 4000.0;
  const double ll = k1 * std::log(k1 / n) + (n - k1) * std::log((n - k1) / n);
  CHECK(std::abs(family_bic(data, 0, {}) - (ll - 0.5 * std::log(n))) < 1e-9);
}

TEST_CASE("hill climbing recovers the chain skeleton") {
  const BayesNet net = testsupport::desk_chain();
  const Dataset data = forward_sample(net, 10000, 61);
  const HillClimbResult r = hill_climb(data);
  CHECK(same_skeleton(skeleton(r.dag), {{0, 1}, {1, 2}}));
  CHECK(r.restart_scores.size() == 5);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] > r.trace[i - 1]);
  CHECK(std::abs(r.score - structure_bic(data, r.dag)) < 1e-9 * std::abs(r.score));

  const HillClimbResult again = hill_climb(data);
  CHECK(again.dag.edges() == r.dag.edges());

  StructureSearchSettings zero;
  zero.max_iters = 0;
  CHECK(hill_climb(data, zero).dag.edge_count() == 0);

  StructureSearchSettings constrained;
  constrained.whitelist = {{0, 2}};
  constrained.blacklist = {{0, 1}, {1, 0}};
  const HillClimbResult c = hill_climb(data, constrained);
  CHECK(c.dag.has_edge(0, 2));
  CHECK_FALSE(c.dag.has_edge(0, 1));
  CHECK_FALSE(c.dag.has_edge(1, 0));

  StructureSearchSettings cyclic;
  cyclic.whitelist = {{0, 1}, {1, 0}};
  CHECK(code_of([&] { hill_climb(data, cyclic); }) == "CycleDetected");
}

TEST_CASE("g-squared against a hand computation") {
  // 2x2 table [[10, 20], [30, 40]].
  Dataset d;
  d.variables = binary({"X", "Y"});
  const int cells[2][2] = {{10, 20}, {30, 40}};
  for (std::size_t x = 0; x < 2; ++x) {
    for (std::size_t y = 0; y < 2; ++y) {
      for (int i = 0; i < cells[x][y]; ++i) d.rows.push_back({x, y});
    }
  }
  double g = 0.0;
  const double row[2] = {30, 70};
  const double col[2] = {40, 60};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) g += 2.0 * cells[x][y] * std::log(cells[x][y] / (row[x] * col[y] / 100.0));
  }
  const CiTestResult r = ci_test_g2(d, 0, 1, {});
  CHECK(std::abs(r.statistic - g) < 1e-12);
  CHECK(r.df == 1.0);
  // Chi-square with one degree of freedom: P(X > g) = erfc(sqrt(g / 2)).
  CHECK(std::abs(r.p_value - std::erfc(std::sqrt(g / 2.0))) < 1e-12);
}

TEST_CASE("g-squared degrees of freedom and data checks") {
  const BayesNet net = testsupport::desk_chain();
  const Dataset data = forward_sample(net, 10000, 71);
  CHECK(ci_test_g2(data, 0, 2, {1}).p_value > 0.01);
  CHECK(ci_test_g2(data, 0, 1, {}).p_value < 1e-10);
  CHECK(ci_test_g2(data, 0, 2, {1}).df == 2.0);

  // A three-state variable that never takes state 2 loses a degree of freedom.
  Dataset d;
  d.variables = {{"X", {"a", "b", "c"}}, {"Y", {"0", "1"}}};
  for (int i = 0; i < 40; ++i) d.rows.push_back({static_cast<std::size_t>(i % 2), static_cast<std::size_t>((i / 2) % 2)});
  CHECK(ci_test_g2(d, 0, 1, {}).df == 1.0);

  Dataset small;
  small.variables = binary({"X", "Y", "Z"});
  small.rows = {{0, 0, 0}, {1, 1, 0}, {0, 1, 0}, {1, 0, 0}, {0, 0, 0}, {1, 1, 1}};
  CHECK(code_of([&] { ci_test_g2(small, 0, 1, {2}); }) == "InsufficientData");
  CHECK(code_of([&] { ci_test_g2(small, 0, 1, {}); }) == "none");
  CHECK(code_of([&] { ci_test_g2(small, 0, 1, {1}); }) == "OverlappingSets");
}

TEST_CASE("pc recovers skeletons and colliders") {
  const Dataset chain = forward_sample(testsupport::desk_chain(), 10000, 81);
  const PcResult r = pc_skeleton(chain, 0.05);
  CHECK(same_skeleton(r.skeleton, {{0, 1}, {1, 2}}));
  CHECK(r.separating_sets.at({0, 2}) == NodeSet{1});
  CHECK(r.oriented.empty());
  CHECK(r.warnings.empty());

  NetworkDocument doc;
  doc.variables = binary({"K", "C", "D"});
  doc.edges = {{"K", "C"}, {"D", "C"}};
  doc.cpts = {{"K", {}, {{0.5, 0.5}}},
              {"C", {"K", "D"}, {{0.9, 0.1}, {0.4, 0.6}, {0.5, 0.5}, {0.1, 0.9}}},
              {"D", {}, {{0.6, 0.4}}}};
  const Dataset coll = forward_sample(BayesNet::from_document(doc), 10000, 82);
  const PcResult c = pc_skeleton(coll, 0.05);
  CHECK(same_skeleton(c.skeleton, {{0, 1}, {1, 2}}));
  CHECK(c.oriented == std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {2, 1}});

  Dataset empty;
  empty.variables = binary({"A", "B", "C"});
  const PcResult e = pc_skeleton(empty, 0.05);
  CHECK(e.skeleton.edges().size() == 3);
  CHECK_FALSE(e.warnings.empty());

  CHECK(code_of([&] { pc_skeleton(chain, 1.5); }) == "InvalidArgument");
}
