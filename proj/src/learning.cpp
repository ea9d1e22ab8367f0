#include "riskgraph/learning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>

#include "riskgraph/error.hpp"
#include "riskgraph/exact.hpp"

namespace riskgraph {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> line_numbers;
};

RawCsv read_csv(const std::string& text) {
  RawCsv csv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (csv.header.empty()) {
      std::set<std::string> seen;
      for (const auto& h : cells) {
        if (h.empty()) throw Error(errc::kParseError, "empty column name", "line " + std::to_string(line_no));
        if (!seen.insert(h).second) {
          throw Error(errc::kParseError, "duplicate column " + h, "line " + std::to_string(line_no));
        }
      }
      csv.header = std::move(cells);
      continue;
    }
    if (cells.size() != csv.header.size()) {
      throw Error(errc::kParseError,
                  "expected " + std::to_string(csv.header.size()) + " cells, found " +
                      std::to_string(cells.size()),
                  "line " + std::to_string(line_no));
    }
    csv.cells.push_back(std::move(cells));
    csv.line_numbers.push_back(line_no);
  }
  if (csv.header.empty()) throw Error(errc::kParseError, "missing header row", "line 1");
  return csv;
}

constexpr const char* kMissingToken = "?";

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Row index of a parent configuration, last parent fastest.
std::size_t row_index(const std::vector<std::size_t>& row, const std::vector<std::size_t>& cols,
                      const std::vector<std::size_t>& cards) {
  std::size_t r = 0;
  for (std::size_t i = 0; i < cols.size(); ++i) r = r * cards[i] + row[cols[i]];
  return r;
}

// Table of counts over parents ++ [child] from complete rows.
std::vector<double> family_counts(const Dataset& data, std::size_t child,
                                  const std::vector<std::size_t>& parents) {
  const auto cards = data.cards();
  std::vector<std::size_t> pc;
  std::size_t rows = 1;
  for (auto p : parents) {
    pc.push_back(cards[p]);
    rows *= cards[p];
  }
  const std::size_t k = cards[child];
  std::vector<double> counts(rows * k, 0.0);
  for (const auto& row : data.rows) counts[row_index(row, parents, pc) * k + row[child]] += 1.0;
  return counts;
}

std::vector<std::vector<double>> rows_from_counts(const std::vector<double>& counts, std::size_t k,
                                                  const std::optional<DirichletPrior>& prior) {
  std::vector<std::vector<double>> rows(counts.size() / k, std::vector<double>(k));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += counts[r * k + j];
    const double alpha = prior ? prior->alpha : 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (total + alpha > 0.0) {
        rows[r][j] = (counts[r * k + j] + alpha / static_cast<double>(k)) / (total + alpha);
      } else {
        rows[r][j] = 1.0 / static_cast<double>(k);
      }
    }
  }
  return rows;
}

BayesNet assemble(const Dag& dag, const std::vector<Variable>& variables,
                  const std::vector<std::vector<std::vector<double>>>& rows) {
  NetworkDocument doc;
  doc.variables = variables;
  for (const auto& [a, b] : dag.edges()) doc.edges.emplace_back(dag.name(a), dag.name(b));
  for (NodeId v = 0; v < dag.size(); ++v) {
    CptSpec spec;
    spec.child = dag.name(v);
    for (auto p : dag.parents(v)) spec.parents.push_back(dag.name(p));
    spec.rows = rows[v];
    doc.cpts.push_back(std::move(spec));
  }
  return BayesNet::from_document(doc);
}

void check_schema(const Dag& dag, const std::vector<Variable>& variables) {
  if (variables.size() != dag.size()) {
    throw Error(errc::kInvalidArgument, "variable list does not match the graph");
  }
  for (NodeId v = 0; v < dag.size(); ++v) {
    if (variables[v].name != dag.name(v)) {
      throw Error(errc::kInvalidArgument, "variable " + variables[v].name + " does not match graph node " +
                                              dag.name(v));
    }
    if (variables[v].cardinality() == 0) {
      throw Error(errc::kInvalidArgument, "variable has no states", variables[v].name);
    }
  }
}

// Data column for each network variable, or kMissing for latent ones.
std::vector<std::size_t> column_map(const std::vector<Variable>& variables, const Dataset& data) {
  std::vector<std::size_t> cols(variables.size(), kMissing);
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (auto c = data.column(variables[v].name)) {
      if (data.variables[*c].cardinality() != variables[v].cardinality()) {
        throw Error(errc::kCardinalityMismatch, "data and model disagree on the state count",
                    variables[v].name);
      }
      cols[v] = *c;
    }
  }
  return cols;
}

}  // namespace

bool Dataset::complete() const {
  for (const auto& row : rows) {
    for (auto s : row) {
      if (s == kMissing) return false;
    }
  }
  return true;
}

std::optional<std::size_t> Dataset::column(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> Dataset::cards() const {
  std::vector<std::size_t> c;
  for (const auto& v : variables) c.push_back(v.cardinality());
  return c;
}

Dataset parse_dataset(const std::string& text, const std::vector<Variable>& schema) {
  const RawCsv csv = read_csv(text);
  Dataset data;
  for (const auto& h : csv.header) {
    auto it = std::find_if(schema.begin(), schema.end(), [&](const Variable& v) { return v.name == h; });
    if (it == schema.end()) throw Error(errc::kParseError, "unknown column " + h, "line 1");
    data.variables.push_back(*it);
  }
  data.rows.reserve(csv.cells.size());
  for (std::size_t r = 0; r < csv.cells.size(); ++r) {
    std::vector<std::size_t> row(csv.header.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& cell = csv.cells[r][c];
      if (cell == kMissingToken) {
        row[c] = kMissing;
        continue;
      }
      const auto& states = data.variables[c].states;
      auto it = std::find(states.begin(), states.end(), cell);
      if (it == states.end()) {
        throw Error(errc::kParseError, "unknown state '" + cell + "' for " + csv.header[c],
                    "line " + std::to_string(csv.line_numbers[r]));
      }
      row[c] = static_cast<std::size_t>(it - states.begin());
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

Dataset parse_dataset(const std::string& text) {
  const RawCsv csv = read_csv(text);
  std::vector<Variable> schema;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    std::set<std::string> labels;
    for (const auto& row : csv.cells) {
      if (row[c] != kMissingToken) labels.insert(row[c]);
    }
    schema.push_back({csv.header[c], {labels.begin(), labels.end()}});
  }
  return parse_dataset(text, schema);
}

std::string write_dataset(const Dataset& data) {
  std::string out;
  for (std::size_t c = 0; c < data.variables.size(); ++c) {
    if (c) out += ',';
    out += data.variables[c].name;
  }
  out += '\n';
  for (const auto& row : data.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c] == kMissing ? std::string(kMissingToken) : data.variables[c].states[row[c]];
    }
    out += '\n';
  }
  return out;
}

Dataset forward_sample(const BayesNet& net, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset data;
  data.variables = net.variables();
  data.rows.assign(n, std::vector<std::size_t>(net.size(), 0));
  const auto& order = net.dag().topological_order();
  for (auto& row : data.rows) {
    for (NodeId v : order) {
      const Cpt& cpt = net.cpt(v);
      const auto probs = cpt.row(row_index(row, cpt.parents, cpt.parent_cards));
      const double u = uniform01(rng);
      double acc = 0.0;
      std::size_t pick = probs.size();
      for (std::size_t s = 0; s < probs.size(); ++s) {
        acc += probs[s];
        if (u < acc) {
          pick = s;
          break;
        }
      }
      if (pick == probs.size()) {
        // Rounding left u above the cumulative sum; take the last possible state.
        for (std::size_t s = probs.size(); s-- > 0;) {
          if (probs[s] > 0.0) {
            pick = s;
            break;
          }
        }
      }
      row[v] = pick;
    }
  }
  return data;
}

Dataset drop_columns(const Dataset& data, const std::vector<std::string>& names) {
  std::vector<std::size_t> keep;
  Dataset out;
  for (std::size_t c = 0; c < data.variables.size(); ++c) {
    if (std::find(names.begin(), names.end(), data.variables[c].name) == names.end()) {
      keep.push_back(c);
      out.variables.push_back(data.variables[c]);
    }
  }
  out.rows.reserve(data.size());
  for (const auto& row : data.rows) {
    std::vector<std::size_t> r;
    r.reserve(keep.size());
    for (auto c : keep) r.push_back(row[c]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

BayesNet fit_mle(const Dag& dag, const std::vector<Variable>& variables, const Dataset& data,
                 const std::optional<DirichletPrior>& prior) {
  check_schema(dag, variables);
  if (prior && !(prior->alpha >= 0.0 && std::isfinite(prior->alpha))) {
    throw Error(errc::kInvalidArgument, "Dirichlet alpha must be finite and non-negative");
  }
  if (data.size() == 0) throw Error(errc::kEmptyDataset, "no rows to fit");
  const auto cols = column_map(variables, data);
  for (std::size_t v = 0; v < cols.size(); ++v) {
    if (cols[v] == kMissing) {
      throw Error(errc::kInvalidArgument, "no data column for " + variables[v].name, variables[v].name);
    }
  }
  if (!data.complete()) throw Error(errc::kInvalidArgument, "data has missing values; use EM");

  std::vector<std::vector<std::vector<double>>> rows(dag.size());
  for (NodeId v = 0; v < dag.size(); ++v) {
    std::vector<std::size_t> pcols;
    for (auto p : dag.parents(v)) pcols.push_back(cols[p]);
    rows[v] = rows_from_counts(family_counts(data, cols[v], pcols), variables[v].cardinality(), prior);
  }
  return assemble(dag, variables, rows);
}

namespace {

struct Pattern {
  Evidence evidence;
  double weight = 0.0;
};

// Identical rows share one E-step; sorted so the reduction order is fixed.
std::vector<Pattern> distinct_patterns(const Dataset& data, const std::vector<std::size_t>& cols) {
  std::map<std::vector<std::size_t>, double> counts;
  for (const auto& row : data.rows) counts[row] += 1.0;
  std::vector<Pattern> out;
  out.reserve(counts.size());
  for (const auto& [row, w] : counts) {
    Pattern p;
    for (std::size_t v = 0; v < cols.size(); ++v) {
      if (cols[v] != kMissing && row[cols[v]] != kMissing) p.evidence.set_hard(v, row[cols[v]]);
    }
    p.weight = w;
    out.push_back(std::move(p));
  }
  return out;
}

struct Expectations {
  std::vector<std::vector<double>> counts;  // per node, parents ++ [child] layout
  double log_likelihood = 0.0;
};

Expectations zero_expectations(const BayesNet& net) {
  Expectations e;
  for (const auto& cpt : net.cpts()) e.counts.emplace_back(cpt.probs.size(), 0.0);
  return e;
}

void accumulate(Expectations& into, const Expectations& from) {
  for (std::size_t v = 0; v < into.counts.size(); ++v) {
    for (std::size_t i = 0; i < into.counts[v].size(); ++i) into.counts[v][i] += from.counts[v][i];
  }
  into.log_likelihood += from.log_likelihood;
}

constexpr std::size_t kEmChunk = 64;

Expectations e_step(const BayesNet& net, const std::vector<Pattern>& patterns, bool parallel) {
  const CliqueTree tree = build_junction_tree(net);
  std::vector<std::vector<NodeId>> families(net.size());
  std::vector<NodeSet> family_sets(net.size());
  for (NodeId v = 0; v < net.size(); ++v) {
    families[v] = net.cpt(v).parents;
    families[v].push_back(v);
    family_sets[v] = make_node_set(families[v]);
  }

  // Chunks are fixed by pattern index, never by thread count, so the sum
  // is the same serial or parallel.
  const std::size_t chunks = (patterns.size() + kEmChunk - 1) / kEmChunk;
  std::vector<Expectations> partial(chunks, zero_expectations(net));
  std::vector<std::string> failures(chunks);
  const auto run_chunk = [&](std::size_t c) {
    Expectations& acc = partial[c];
    const std::size_t end = std::min(patterns.size(), (c + 1) * kEmChunk);
    for (std::size_t i = c * kEmChunk; i < end; ++i) {
      const CalibratedTree cal = calibrate(tree, patterns[i].evidence);
      acc.log_likelihood += patterns[i].weight * cal.log_normalizer;
      for (NodeId v = 0; v < net.size(); ++v) {
        const Factor fam = permute(clique_marginal(cal, family_sets[v]), families[v]);
        auto& counts = acc.counts[v];
        for (std::size_t j = 0; j < counts.size(); ++j) counts[j] += patterns[i].weight * fam.values()[j];
      }
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < chunks; ++c) {
      try {
        run_chunk(c);
      } catch (const std::exception& e) {
        failures[c] = e.what();
      }
    }
  } else {
    for (std::size_t c = 0; c < chunks; ++c) {
      try {
        run_chunk(c);
      } catch (const std::exception& e) {
        failures[c] = e.what();
      }
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(errc::kZeroMass, "a data row has zero probability under the model: " + f);
  }
  Expectations total = zero_expectations(net);
  for (const auto& p : partial) accumulate(total, p);
  return total;
}

}  // namespace

EmResult fit_em(const Dag& dag, const std::vector<Variable>& variables, const Dataset& data,
                const EmSettings& settings) {
  check_schema(dag, variables);
  if (data.size() == 0) throw Error(errc::kEmptyDataset, "no rows to fit");
  if (!(settings.tol >= 0.0)) throw Error(errc::kInvalidArgument, "tolerance must be non-negative");
  const auto cols = column_map(variables, data);

  std::vector<std::vector<std::vector<double>>> rows(dag.size());
  std::mt19937_64 rng(settings.seed);
  for (NodeId v = 0; v < dag.size(); ++v) {
    std::size_t r = 1;
    for (auto p : dag.parents(v)) r *= variables[p].cardinality();
    const std::size_t k = variables[v].cardinality();
    rows[v].assign(r, std::vector<double>(k, 1.0 / static_cast<double>(k)));
    if (settings.init == EmSettings::Init::Random) {
      for (auto& row : rows[v]) {
        double total = 0.0;
        for (auto& x : row) {
          x = 0.5 + uniform01(rng);
          total += x;
        }
        for (auto& x : row) x /= total;
      }
    }
  }

  const auto patterns = distinct_patterns(data, cols);
  EmResult result;
  result.net = assemble(dag, variables, rows);
  Expectations ex = e_step(result.net, patterns, settings.parallel);
  result.trace.push_back(ex.log_likelihood);
  for (std::size_t it = 0; it < settings.max_iters; ++it) {
    for (NodeId v = 0; v < dag.size(); ++v) {
      rows[v] = rows_from_counts(ex.counts[v], variables[v].cardinality(), std::nullopt);
    }
    result.net = assemble(dag, variables, rows);
    ex = e_step(result.net, patterns, settings.parallel);
    result.trace.push_back(ex.log_likelihood);
    result.iterations = it + 1;
    if (ex.log_likelihood - result.trace[result.trace.size() - 2] < settings.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

double log_likelihood(const BayesNet& net, const Dataset& data) {
  const auto cols = column_map(net.variables(), data);
  for (std::size_t v = 0; v < cols.size(); ++v) {
    if (cols[v] == kMissing) throw Error(errc::kInvalidArgument, "no data column", net.variable(v).name);
  }
  if (!data.complete()) throw Error(errc::kInvalidArgument, "data has missing values");
  double ll = 0.0;
  for (NodeId v = 0; v < net.size(); ++v) {
    const Cpt& cpt = net.cpt(v);
    std::vector<std::size_t> pcols;
    for (auto p : cpt.parents) pcols.push_back(cols[p]);
    const auto counts = family_counts(data, cols[v], pcols);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] > 0.0) ll += counts[i] * std::log(cpt.probs[i]);
    }
  }
  return ll;
}

std::size_t free_parameters(const BayesNet& net) {
  std::size_t k = 0;
  for (const auto& cpt : net.cpts()) k += (cpt.child_card - 1) * cpt.row_count();
  return k;
}

double score_bic(const BayesNet& net, const Dataset& data) {
  if (data.size() == 0) throw Error(errc::kEmptyDataset, "no rows to score");
  return log_likelihood(net, data) -
         0.5 * static_cast<double>(free_parameters(net)) * std::log(static_cast<double>(data.size()));
}

double family_bic(const Dataset& data, NodeId child, const std::vector<NodeId>& parents) {
  if (data.size() == 0) throw Error(errc::kEmptyDataset, "no rows to score");
  const std::size_t k = data.variables.at(child).cardinality();
  const auto counts = family_counts(data, child, parents);
  double ll = 0.0;
  for (std::size_t r = 0; r < counts.size() / k; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += counts[r * k + j];
    for (std::size_t j = 0; j < k; ++j) {
      const double c = counts[r * k + j];
      if (c > 0.0) ll += c * std::log(c / total);
    }
  }
  const double params = static_cast<double>((k - 1) * (counts.size() / k));
  return ll - 0.5 * params * std::log(static_cast<double>(data.size()));
}

double structure_bic(const Dataset& data, const Dag& dag) {
  double s = 0.0;
  for (NodeId v = 0; v < dag.size(); ++v) s += family_bic(data, v, dag.parents(v));
  return s;
}

namespace {

class SearchGraph {
 public:
  explicit SearchGraph(std::size_t n) : parents_(n) {}

  const std::vector<NodeId>& parents(NodeId v) const { return parents_[v]; }
  bool has_edge(NodeId a, NodeId b) const {
    return std::find(parents_[b].begin(), parents_[b].end(), a) != parents_[b].end();
  }
  void add(NodeId a, NodeId b) {
    parents_[b].push_back(a);
    std::sort(parents_[b].begin(), parents_[b].end());
  }
  void remove(NodeId a, NodeId b) { parents_[b].erase(std::find(parents_[b].begin(), parents_[b].end(), a)); }

  // True when `to` is reachable from `from` along directed edges, ignoring
  // the single edge skip (if any).
  bool reaches(NodeId from, NodeId to, std::pair<NodeId, NodeId> skip = {kMissing, kMissing}) const {
    const std::size_t n = parents_.size();
    std::vector<std::vector<NodeId>> children(n);
    for (NodeId v = 0; v < n; ++v) {
      for (auto p : parents_[v]) {
        if (!(p == skip.first && v == skip.second)) children[p].push_back(v);
      }
    }
    std::vector<bool> seen(n, false);
    std::vector<NodeId> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      if (u == to) return true;
      for (auto c : children[u]) {
        if (!seen[c]) {
          seen[c] = true;
          stack.push_back(c);
        }
      }
    }
    return false;
  }

  Dag to_dag(const std::vector<std::string>& names) const {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId v = 0; v < parents_.size(); ++v) {
      for (auto p : parents_[v]) edges.emplace_back(p, v);
    }
    std::sort(edges.begin(), edges.end());
    return Dag(names, edges);
  }

 private:
  std::vector<std::vector<NodeId>> parents_;
};

class FamilyCache {
 public:
  explicit FamilyCache(const Dataset& data) : data_(data) {}
  double operator()(NodeId child, const std::vector<NodeId>& parents) {
    auto key = parents;
    key.push_back(child);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double s = family_bic(data_, child, parents);
    cache_.emplace(std::move(key), s);
    return s;
  }

 private:
  const Dataset& data_;
  std::map<std::vector<NodeId>, double> cache_;
};

struct Move {
  enum Kind { Add, Remove, Reverse } kind;
  NodeId a;
  NodeId b;
};

bool listed(const std::vector<std::pair<NodeId, NodeId>>& list, NodeId a, NodeId b) {
  return std::find(list.begin(), list.end(), std::make_pair(a, b)) != list.end();
}

std::vector<Move> legal_moves(const SearchGraph& g, std::size_t n, const StructureSearchSettings& s) {
  std::vector<Move> moves;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = 0; b < n; ++b) {
      if (a == b) continue;
      if (g.has_edge(a, b)) {
        if (listed(s.whitelist, a, b)) continue;
        moves.push_back({Move::Remove, a, b});
        if (!listed(s.blacklist, b, a) && !g.reaches(a, b, {a, b})) moves.push_back({Move::Reverse, a, b});
      } else if (!g.has_edge(b, a) && !listed(s.blacklist, a, b) && !g.reaches(b, a)) {
        moves.push_back({Move::Add, a, b});
      }
    }
  }
  return moves;
}

std::vector<NodeId> with(std::vector<NodeId> ps, NodeId x) {
  ps.push_back(x);
  std::sort(ps.begin(), ps.end());
  return ps;
}

std::vector<NodeId> without(std::vector<NodeId> ps, NodeId x) {
  ps.erase(std::find(ps.begin(), ps.end(), x));
  return ps;
}

double move_delta(const SearchGraph& g, const Move& m, FamilyCache& score) {
  switch (m.kind) {
    case Move::Add:
      return score(m.b, with(g.parents(m.b), m.a)) - score(m.b, g.parents(m.b));
    case Move::Remove:
      return score(m.b, without(g.parents(m.b), m.a)) - score(m.b, g.parents(m.b));
    case Move::Reverse:
      return score(m.b, without(g.parents(m.b), m.a)) - score(m.b, g.parents(m.b)) +
             score(m.a, with(g.parents(m.a), m.b)) - score(m.a, g.parents(m.a));
  }
  return 0.0;
}

void apply_move(SearchGraph& g, const Move& m) {
  switch (m.kind) {
    case Move::Add:
      g.add(m.a, m.b);
      break;
    case Move::Remove:
      g.remove(m.a, m.b);
      break;
    case Move::Reverse:
      g.remove(m.a, m.b);
      g.add(m.b, m.a);
      break;
  }
}

double graph_score(const SearchGraph& g, std::size_t n, FamilyCache& score) {
  double s = 0.0;
  for (NodeId v = 0; v < n; ++v) s += score(v, g.parents(v));
  return s;
}

// Improvements smaller than this are treated as ties, so rounding noise
// cannot make the search cycle.
constexpr double kMinGain = 1e-9;

std::vector<double> climb(SearchGraph& g, std::size_t n, const StructureSearchSettings& s,
                          FamilyCache& score) {
  std::vector<double> trace{graph_score(g, n, score)};
  for (std::size_t it = 0; it < s.max_iters; ++it) {
    const auto moves = legal_moves(g, n, s);
    double best = kMinGain;
    const Move* pick = nullptr;
    for (const auto& m : moves) {
      const double d = move_delta(g, m, score);
      if (d > best) {
        best = d;
        pick = &m;
      }
    }
    if (!pick) break;
    apply_move(g, *pick);
    trace.push_back(graph_score(g, n, score));
  }
  return trace;
}

}  // namespace

HillClimbResult hill_climb(const Dataset& data, const StructureSearchSettings& settings) {
  if (data.size() == 0) throw Error(errc::kEmptyDataset, "no rows to learn from");
  if (!data.complete()) throw Error(errc::kInvalidArgument, "structure search needs complete data");
  const std::size_t n = data.variables.size();
  std::vector<std::string> names;
  for (const auto& v : data.variables) names.push_back(v.name);
  for (const auto& lists : {settings.whitelist, settings.blacklist}) {
    for (const auto& [a, b] : lists) {
      if (a >= n || b >= n || a == b) throw Error(errc::kInvalidArgument, "bad edge in search constraints");
    }
  }
  for (const auto& e : settings.whitelist) {
    if (listed(settings.blacklist, e.first, e.second)) {
      throw Error(errc::kInvalidArgument, "edge both required and forbidden");
    }
  }

  FamilyCache score(data);
  SearchGraph start(n);
  for (const auto& [a, b] : settings.whitelist) start.add(a, b);
  (void)start.to_dag(names);  // throws CycleDetected on a cyclic whitelist

  HillClimbResult result;
  SearchGraph best = start;
  result.trace = climb(best, n, settings, score);
  result.score = result.trace.back();
  result.restart_scores.push_back(result.score);

  std::mt19937_64 rng(settings.seed);
  const SearchGraph first = best;
  // Perturbation is part of the search, so a zero-iteration run skips it.
  const std::size_t restarts = settings.max_iters == 0 ? 1 : settings.restarts;
  for (std::size_t r = 1; r < restarts; ++r) {
    SearchGraph g = first;
    for (std::size_t k = 0; k < settings.perturbation_moves; ++k) {
      const auto moves = legal_moves(g, n, settings);
      if (moves.empty()) break;
      apply_move(g, moves[rng() % moves.size()]);
    }
    auto trace = climb(g, n, settings, score);
    result.restart_scores.push_back(trace.back());
    if (trace.back() > result.score + kMinGain) {
      result.score = trace.back();
      result.trace = std::move(trace);
      best = g;
    }
  }
  result.dag = best.to_dag(names);
  return result;
}

CiTestResult ci_test_g2(const Dataset& data, NodeId x, NodeId y, const NodeSet& z) {
  const std::size_t n = data.variables.size();
  if (x >= n || y >= n || x == y) throw Error(errc::kInvalidArgument, "bad test variables");
  for (auto v : z) {
    if (v >= n || v == x || v == y) throw Error(errc::kOverlappingSets, "conditioning set overlaps the test pair");
  }
  if (!data.complete()) throw Error(errc::kInvalidArgument, "independence tests need complete data");
  const auto cards = data.cards();
  const std::size_t cx = cards[x];
  const std::size_t cy = cards[y];
  std::vector<std::size_t> zc;
  for (auto v : z) zc.push_back(cards[v]);

  // Only observed strata are materialized.
  std::map<std::size_t, std::vector<double>> strata;
  for (const auto& row : data.rows) {
    auto& t = strata[row_index(row, z, zc)];
    if (t.empty()) t.assign(cx * cy, 0.0);
    t[row[x] * cy + row[y]] += 1.0;
  }
  if (strata.empty()) {
    throw Error(errc::kInsufficientData, "no rows to test");
  }

  CiTestResult res;
  for (const auto& [key, t] : strata) {
    std::vector<double> mx(cx, 0.0);
    std::vector<double> my(cy, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < cx; ++i) {
      for (std::size_t j = 0; j < cy; ++j) {
        mx[i] += t[i * cy + j];
        my[j] += t[i * cy + j];
        total += t[i * cy + j];
      }
    }
    if (total < static_cast<double>(kMinStratumRows)) {
      throw Error(errc::kInsufficientData, "a conditioning stratum has fewer than " +
                                               std::to_string(kMinStratumRows) + " rows");
    }
    for (std::size_t i = 0; i < cx; ++i) {
      for (std::size_t j = 0; j < cy; ++j) {
        const double o = t[i * cy + j];
        if (o > 0.0) res.statistic += 2.0 * o * std::log(o * total / (mx[i] * my[j]));
      }
    }
    const auto nonzero = [](const std::vector<double>& m) {
      return static_cast<double>(std::count_if(m.begin(), m.end(), [](double c) { return c > 0.0; }));
    };
    res.df += std::max(0.0, nonzero(mx) - 1.0) * std::max(0.0, nonzero(my) - 1.0);
  }
  res.statistic = std::max(0.0, res.statistic);
  res.p_value = res.df > 0.0 ? boost::math::gamma_q(res.df / 2.0, res.statistic / 2.0) : 1.0;
  return res;
}

namespace {

void for_each_subset(const std::vector<NodeId>& pool, std::size_t k,
                     const std::function<bool(const NodeSet&)>& visit) {
  if (k > pool.size()) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    NodeSet s;
    for (auto i : idx) s.push_back(pool[i]);
    if (visit(s)) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == pool.size() - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

PcResult pc_skeleton(const Dataset& data, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(errc::kInvalidArgument, "alpha must lie in (0, 1)");
  const std::size_t n = data.variables.size();
  std::vector<std::string> names;
  for (const auto& v : data.variables) names.push_back(v.name);
  PcResult res;
  res.skeleton = UndirectedGraph(names);
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) res.skeleton.add_edge(a, b);
  }
  if (data.size() == 0) {
    res.warnings.push_back("no rows: every edge kept");
    return res;
  }

  std::set<std::pair<NodeId, NodeId>> warned;
  for (std::size_t level = 0;; ++level) {
    // Adjacencies are frozen per level, so the result does not depend on
    // the order edges are visited.
    std::vector<std::vector<NodeId>> adj(n);
    bool any = false;
    for (NodeId v = 0; v < n; ++v) {
      adj[v].assign(res.skeleton.neighbors(v).begin(), res.skeleton.neighbors(v).end());
      if (adj[v].size() > level) any = true;
    }
    if (!any) break;
    for (const auto& [a, b] : res.skeleton.edges()) {
      bool removed = false;
      for (const auto& [x, y] : {std::make_pair(a, b), std::make_pair(b, a)}) {
        if (removed) break;
        std::vector<NodeId> pool;
        for (auto v : adj[x]) {
          if (v != y) pool.push_back(v);
        }
        for_each_subset(pool, level, [&](const NodeSet& z) {
          try {
            const CiTestResult t = ci_test_g2(data, x, y, z);
            if (t.p_value > alpha) {
              res.skeleton.remove_edge(a, b);
              res.separating_sets[{a, b}] = z;
              removed = true;
            }
          } catch (const Error& e) {
            if (e.code() != errc::kInsufficientData) throw;
            if (warned.insert({a, b}).second) {
              res.warnings.push_back("edge " + names[a] + " - " + names[b] + " kept: " + e.what());
            }
          }
          return removed;
        });
      }
    }
  }

  for (NodeId c = 0; c < n; ++c) {
    const std::vector<NodeId> nb(res.skeleton.neighbors(c).begin(), res.skeleton.neighbors(c).end());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        const NodeId a = nb[i];
        const NodeId b = nb[j];
        if (res.skeleton.has_edge(a, b)) continue;
        auto it = res.separating_sets.find({a, b});
        if (it == res.separating_sets.end()) continue;
        if (std::binary_search(it->second.begin(), it->second.end(), c)) continue;
        res.oriented.emplace_back(a, c);
        res.oriented.emplace_back(b, c);
      }
    }
  }
  std::sort(res.oriented.begin(), res.oriented.end());
  res.oriented.erase(std::unique(res.oriented.begin(), res.oriented.end()), res.oriented.end());
  return res;
}

}  // namespace riskgraph
