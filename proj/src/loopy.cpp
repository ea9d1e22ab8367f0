#include "riskgraph/loopy.hpp"

#include <algorithm>
#include <cmath>

#include "riskgraph/error.hpp"

namespace riskgraph {

FactorGraph FactorGraph::from_network(const BayesNet& net, const Evidence& ev) {
  ev.validate(net.cards());
  FactorGraph g;
  g.cards = net.cards();
  g.factors = net.factors();
  for (const auto& [v, item] : ev.items()) {
    std::vector<double> w(g.cards[v], 0.0);
    if (const auto* hard = std::get_if<HardEvidence>(&item)) {
      w[hard->state] = 1.0;
    } else {
      w = std::get<SoftEvidence>(item).likelihood;
    }
    g.factors.emplace_back(std::vector<NodeId>{v}, std::vector<std::size_t>{g.cards[v]}, w);
  }
  g.var_factors.resize(g.cards.size());
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    for (NodeId v : g.factors[f].scope()) g.var_factors[v].push_back(f);
  }
  return g;
}

void BpSettings::validate() const {
  if (!(damping >= 0.0 && damping < 1.0)) {
    throw Error(errc::kInvalidArgument, "damping must lie in [0, 1)");
  }
  if (!(tolerance > 0.0)) throw Error(errc::kInvalidArgument, "tolerance must be positive");
}

namespace {

using Message = std::vector<double>;

void normalize_message(Message& m) {
  double s = 0.0;
  for (double x : m) s += x;
  if (!(s > 0.0)) throw Error(errc::kZeroMass, "message lost all mass");
  for (double& x : m) x /= s;
}

// Message from factor f to its k-th scope variable given incoming
// variable-to-factor messages.
// Geometric damping: old^damping * new^(1 - damping), renormalized. Same
// fixed points as the arithmetic mix, but a zero stays exactly zero, so
// impossible evidence surfaces as an all-zero message.
bool damp(Message& m, const Message& old, double damping) {
  if (damping > 0.0) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = (m[i] > 0.0 && old[i] > 0.0)
                 ? std::exp((1.0 - damping) * std::log(m[i]) + damping * std::log(old[i]))
                 : 0.0;
    }
  }
  double sum = 0.0;
  for (double x : m) sum += x;
  if (!(sum > 0.0)) return false;
  for (double& x : m) x /= sum;
  return true;
}

Message factor_to_var(const Factor& f, const std::vector<Message>& incoming, std::size_t k) {
  const auto& cards = f.cards();
  Message out(cards[k], 0.0);
  std::vector<std::size_t> a(cards.size(), 0);
  const auto& vals = f.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    double w = vals[i];
    for (std::size_t j = 0; j < cards.size() && w != 0.0; ++j) {
      if (j != k) w *= incoming[j][a[j]];
    }
    out[a[k]] += w;
    for (std::size_t j = cards.size(); j-- > 0;) {
      if (++a[j] < cards[j]) break;
      a[j] = 0;
    }
  }
  return out;
}

}  // namespace

BpResult loopy_bp(const FactorGraph& g, const BpSettings& s) {
  s.validate();
  const std::size_t nf = g.factors.size();
  const std::size_t nv = g.cards.size();

  // Messages indexed by (factor, scope position).
  std::vector<std::vector<Message>> v2f(nf);
  std::vector<std::vector<Message>> f2v(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t k = 0; k < g.factors[f].scope().size(); ++k) {
      const std::size_t c = g.factors[f].cards()[k];
      v2f[f].emplace_back(c, 1.0 / static_cast<double>(c));
      f2v[f].emplace_back(c, 1.0 / static_cast<double>(c));
    }
  }
  // Position of variable v inside factor f's scope.
  auto pos = [&](std::size_t f, NodeId v) { return g.factors[f].position(v); };

  BpResult result;
  const auto nf_i = static_cast<std::ptrdiff_t>(nf);
  for (std::size_t it = 0; it < s.max_iters && nf > 0; ++it) {
    std::vector<std::vector<Message>> new_f2v(nf);
    std::vector<std::vector<Message>> new_v2f(nf);
    std::vector<double> change(nf, 0.0);
    std::vector<char> zero(nf, 0);

    auto update_factor = [&](std::size_t f) {
      const Factor& fac = g.factors[f];
      for (std::size_t k = 0; k < fac.scope().size(); ++k) {
        Message m = factor_to_var(fac, v2f[f], k);
        double sum = 0.0;
        for (double x : m) sum += x;
        if (!(sum > 0.0)) {
          zero[f] = 1;
          return;
        }
        for (double& x : m) x /= sum;
        if (!damp(m, f2v[f][k], s.damping)) {
          zero[f] = 1;
          return;
        }
        new_f2v[f].push_back(std::move(m));
      }
      // Variable-to-factor messages use the previous factor-to-variable round.
      for (std::size_t k = 0; k < fac.scope().size(); ++k) {
        const NodeId v = fac.scope()[k];
        Message m(g.cards[v], 1.0);
        for (std::size_t h : g.var_factors[v]) {
          if (h == f) continue;
          const Message& in = f2v[h][pos(h, v)];
          for (std::size_t i = 0; i < m.size(); ++i) m[i] *= in[i];
        }
        double sum = 0.0;
        for (double x : m) sum += x;
        if (!(sum > 0.0)) {
          zero[f] = 1;
          return;
        }
        for (double& x : m) x /= sum;
        if (!damp(m, v2f[f][k], s.damping)) {
          zero[f] = 1;
          return;
        }
        new_v2f[f].push_back(std::move(m));
      }
      double c = 0.0;
      for (std::size_t k = 0; k < fac.scope().size(); ++k) {
        for (std::size_t i = 0; i < new_f2v[f][k].size(); ++i) {
          c = std::max(c, std::abs(new_f2v[f][k][i] - f2v[f][k][i]));
          c = std::max(c, std::abs(new_v2f[f][k][i] - v2f[f][k][i]));
        }
      }
      change[f] = c;
    };

    if (s.parallel) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t f = 0; f < nf_i; ++f) update_factor(static_cast<std::size_t>(f));
    } else {
      for (std::size_t f = 0; f < nf; ++f) update_factor(f);
    }
    if (std::find(zero.begin(), zero.end(), 1) != zero.end()) {
      throw Error(errc::kZeroMass, "belief propagation lost all mass (impossible evidence)");
    }

    for (std::size_t f = 0; f < nf; ++f) {
      for (auto& m : new_f2v[f]) normalize_message(m);
      for (auto& m : new_v2f[f]) normalize_message(m);
    }
    f2v = std::move(new_f2v);
    v2f = std::move(new_v2f);
    result.iterations = it + 1;
    result.last_change = *std::max_element(change.begin(), change.end());
    if (result.last_change < s.tolerance) {
      result.converged = true;
      break;
    }
  }
  if (nf == 0) result.converged = true;

  for (NodeId v = 0; v < nv; ++v) {
    Message b(g.cards[v], 1.0);
    for (std::size_t h : g.var_factors[v]) {
      const Message& in = f2v[h][pos(h, v)];
      for (std::size_t i = 0; i < b.size(); ++i) b[i] *= in[i];
    }
    double sum = 0.0;
    for (double x : b) sum += x;
    if (!(sum > 0.0)) throw Error(errc::kZeroMass, "belief has no mass", std::to_string(v));
    for (double& x : b) x /= sum;
    result.marginals.push_back({v, std::move(b)});
  }
  return result;
}

BpResult loopy_bp(const BayesNet& net, const Evidence& ev, const BpSettings& settings) {
  return loopy_bp(FactorGraph::from_network(net, ev), settings);
}

}  // namespace riskgraph
