#include <random>

#include "doctest.h"
#include "riskgraph/error.hpp"
#include "riskgraph/loopy.hpp"
#include "support.hpp"

using namespace riskgraph;

namespace {

BayesNet four_cycle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Dag dag = Dag::from_named_edges({"A", "B", "C", "D"}, {{"A", "B"}, {"A", "C"}, {"B", "D"}, {"C", "D"}});
  return testsupport::random_net(rng, dag, 2);
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / 2.0;
}

}  // namespace

TEST_CASE("exact on the desk chain") {
  const BayesNet net = testsupport::desk_chain();
  Evidence k1;
  k1.set_hard(0, 1);
  const BpResult r = loopy_bp(net, k1);
  CHECK(r.converged);
  CHECK(std::abs(r.marginals[2].probs[1] - 0.084) < 1e-6);
}

TEST_CASE("property: exact on polytrees") {
  std::mt19937_64 rng(41);
  int trees = 0;
  for (int g = 0; g < 200 && trees < 30; ++g) {
    const Dag dag = testsupport::random_dag(rng, 3 + rng() % 6, 0.3);
    if (!is_polytree(dag)) continue;
    ++trees;
    const BayesNet net = testsupport::random_net(rng, dag);
    const Evidence ev = testsupport::random_evidence(rng, net);
    const BpResult r = loopy_bp(net, ev);
    CHECK(r.converged);
    const auto oracle = testsupport::oracle_marginals(net, ev);
    for (const auto& m : r.marginals) CHECK(testsupport::max_diff(m.probs, oracle[m.var]) < 1e-6);
  }
  CHECK(trees == 30);
}

TEST_CASE("four-cycle stress net") {
  const BayesNet net = four_cycle(7);
  const BpResult r = loopy_bp(net, {});
  CHECK(r.converged);
  CHECK(r.iterations > 0);
  const auto oracle = testsupport::oracle_marginals(net, {});
  for (const auto& m : r.marginals) CHECK(total_variation(m.probs, oracle[m.var]) < 0.05);
}

TEST_CASE("non-convergence is reported") {
  BpSettings s;
  s.max_iters = 1;
  s.tolerance = 1e-300;
  const BpResult r = loopy_bp(four_cycle(8), {}, s);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("damping does not move the fixed point") {
  const BayesNet net = four_cycle(9);
  Evidence ev;
  ev.set_hard(3, 1);
  BpSettings none;
  none.damping = 0.0;
  BpSettings heavy;
  heavy.damping = 0.9;
  heavy.max_iters = 2000;
  const BpResult a = loopy_bp(net, ev, none);
  const BpResult b = loopy_bp(net, ev, heavy);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  for (std::size_t v = 0; v < net.size(); ++v) {
    CHECK(testsupport::max_diff(a.marginals[v].probs, b.marginals[v].probs) < 1e-6);
  }
}

TEST_CASE("parallel and serial message rounds agree") {
  std::mt19937_64 rng(43);
  const BayesNet net = testsupport::random_net(rng, testsupport::random_dag(rng, 9, 0.35));
  const Evidence ev = testsupport::random_evidence(rng, net);
  BpSettings par;
  BpSettings ser;
  ser.parallel = false;
  const BpResult a = loopy_bp(net, ev, par);
  const BpResult b = loopy_bp(net, ev, ser);
  CHECK(a.iterations == b.iterations);
  for (std::size_t v = 0; v < net.size(); ++v) {
    CHECK(testsupport::max_diff(a.marginals[v].probs, b.marginals[v].probs) <= 1e-12);
  }
}

TEST_CASE("settings validation and impossible evidence") {
  BpSettings bad;
  bad.damping = 1.0;
  CHECK_THROWS_AS(loopy_bp(testsupport::desk_chain(), {}, bad), Error);

  auto doc = testsupport::desk_chain().to_document();
  doc.cpts[2].rows = {{1.0, 0.0}, {1.0, 0.0}};
  Evidence c1;
  c1.set_hard(2, 1);
  try {
    loopy_bp(BayesNet::from_document(doc), c1);
    FAIL("impossible evidence accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "ZeroMass");
  }
}
