// Serial reference kernels against their OpenMP counterparts. The argument is
// log2 of the table size.

#include <random>

#include <benchmark/benchmark.h>

#include "riskgraph/catalog.hpp"
#include "riskgraph/factor.hpp"
#include "riskgraph/learning.hpp"
#include "riskgraph/loopy.hpp"
#include "riskgraph/network.hpp"

using namespace riskgraph;

namespace {

Factor binary_factor(std::mt19937_64& rng, std::vector<NodeId> scope) {
  std::vector<std::size_t> cards(scope.size(), 2);
  std::vector<double> values(std::size_t{1} << scope.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : values) x = u(rng);
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

// Two factors sharing half their variables; the product has 2^bits entries.
std::pair<Factor, Factor> product_inputs(int bits) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(bits));
  std::vector<NodeId> a, b;
  for (int i = 0; i < bits; ++i) {
    if (i < bits * 3 / 4) a.push_back(static_cast<NodeId>(i));
    if (i >= bits / 4) b.push_back(static_cast<NodeId>(i));
  }
  return {binary_factor(rng, a), binary_factor(rng, b)};
}

template <void (*Kernel)(const Factor&, const Factor&, Factor&)>
void BM_Product(benchmark::State& state) {
  const auto [a, b] = product_inputs(static_cast<int>(state.range(0)));
  Factor out = product(a, b);
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

template <void (*Kernel)(const Factor&, const std::vector<bool>&, Factor&)>
void BM_Marginalize(benchmark::State& state) {
  const int bits = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::vector<NodeId> scope;
  for (int i = 0; i < bits; ++i) scope.push_back(static_cast<NodeId>(i));
  const Factor f = binary_factor(rng, scope);
  std::vector<bool> keep(scope.size());
  NodeSet drop;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    keep[i] = i % 3 != 0;
    if (!keep[i]) drop.push_back(scope[i]);
  }
  Factor out = marginalize(f, drop);
  for (auto _ : state) {
    Kernel(f, keep, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.size()));
}

template <void (*Kernel)(const BayesNet&, const Evidence&, Factor&)>
void BM_Enumerate(benchmark::State& state) {
  const BayesNet net = build_entry("fig9_capital").net;
  const Evidence none;
  Factor out = joint_enumerate(net, none);
  for (auto _ : state) {
    Kernel(net, none, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void BM_LoopyRounds(benchmark::State& state) {
  const BayesNet net = build_entry("fig12_smart_home").net;
  BpSettings s;
  s.parallel = state.range(0) != 0;
  const Evidence none;
  for (auto _ : state) benchmark::DoNotOptimize(loopy_bp(net, none, s).iterations);
}

void BM_EmStep(benchmark::State& state) {
  const BayesNet truth = build_entry("fig11_dynamic_claims:plain").net;
  const Dataset data = drop_columns(forward_sample(truth, 20000, 3), {"K"});
  EmSettings s;
  s.max_iters = 5;
  s.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(fit_em(truth.dag(), truth.variables(), data, s).trace.back());
}

}  // namespace

BENCHMARK(BM_Product<kernels::product_serial>)->Name("product/serial")->DenseRange(14, 22, 4);
BENCHMARK(BM_Product<kernels::product_parallel>)->Name("product/parallel")->DenseRange(14, 22, 4);
BENCHMARK(BM_Marginalize<kernels::marginalize_serial>)->Name("marginalize/serial")->DenseRange(14, 22, 4);
BENCHMARK(BM_Marginalize<kernels::marginalize_parallel>)->Name("marginalize/parallel")->DenseRange(14, 22, 4);
BENCHMARK(BM_Enumerate<kernels::enumerate_serial>)->Name("enumerate_fig9/serial");
BENCHMARK(BM_Enumerate<kernels::enumerate_parallel>)->Name("enumerate_fig9/parallel");
BENCHMARK(BM_LoopyRounds)->Name("loopy_fig12")->ArgName("parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_EmStep)->Name("em_fig11")->ArgName("parallel")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
