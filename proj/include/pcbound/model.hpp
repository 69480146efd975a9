#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pcbound/error.hpp"

namespace pcbound {

// Value index per variable, in the graph's declaration order.
using Assignment = std::vector<std::size_t>;

// (variable index, value index) pairs sorted by variable, one entry per variable.
using PartialAssignment = std::vector<std::pair<std::size_t, std::size_t>>;

inline constexpr double kIngestTolerance = 1e-9;
inline constexpr double kOracleTolerance = 1e-12;

inline bool matches(const Assignment& values, const PartialAssignment& condition) {
  return std::all_of(condition.begin(), condition.end(),
                     [&](const auto& kv) { return values[kv.first] == kv.second; });
}

struct VariableSpec {
  std::string name;
  std::vector<std::string> domain;
};

// Declared form of a causal graph, as read from a file. Names, not indices.
struct GraphDecl {
  std::vector<VariableSpec> variables;
  std::vector<std::pair<std::string, std::string>> directed_edges;
  std::vector<std::pair<std::string, std::string>> bidirected_edges;
  std::string protected_attr;
  std::string decision;
  // True outcome column, only needed for the counterfactual error rate notion.
  std::optional<std::string> outcome;
};

namespace detail {

inline std::unordered_map<std::string, std::size_t> index_names(const GraphDecl& g) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.variables.size(); ++i) {
    const auto& var = g.variables[i];
    if (var.name.empty()) throw NameError("variable " + std::to_string(i) + " has an empty name");
    if (!index.emplace(var.name, i).second) throw NameError("variable '" + var.name + "' declared twice");
  }
  return index;
}

inline std::size_t lookup(const std::unordered_map<std::string, std::size_t>& index,
                          const std::string& name, std::string_view context) {
  auto it = index.find(name);
  if (it == index.end())
    throw NameError(std::string(context) + " references undeclared variable '" + name + "'");
  return it->second;
}

}  // namespace detail

inline void validate_graph(const GraphDecl& g) {
  const auto index = detail::index_names(g);
  for (const auto& var : g.variables) {
    if (var.domain.empty()) throw DomainError("variable '" + var.name + "' has an empty domain");
    std::set<std::string> labels(var.domain.begin(), var.domain.end());
    if (labels.size() != var.domain.size())
      throw DomainError("variable '" + var.name + "' has duplicate domain labels");
  }

  const std::size_t n = g.variables.size();
  std::vector<std::vector<std::size_t>> children(n);
  for (const auto& [from, to] : g.directed_edges) {
    std::size_t a = detail::lookup(index, from, "edge");
    std::size_t b = detail::lookup(index, to, "edge");
    if (a == b) throw CycleError("self-loop on '" + from + "'");
    children[a].push_back(b);
  }
  for (const auto& [x, y] : g.bidirected_edges) {
    std::size_t a = detail::lookup(index, x, "confounded pair");
    std::size_t b = detail::lookup(index, y, "confounded pair");
    if (a == b) throw NameError("confounded pair has identical endpoints '" + x + "'");
  }

  if (g.protected_attr.empty() || !index.contains(g.protected_attr))
    throw RoleError("protected attribute '" + g.protected_attr + "' is not a declared variable");
  if (g.decision.empty() || !index.contains(g.decision))
    throw RoleError("decision '" + g.decision + "' is not a declared variable");
  if (g.protected_attr == g.decision) throw RoleError("protected attribute and decision must differ");
  if (g.outcome) {
    if (!index.contains(*g.outcome))
      throw RoleError("outcome '" + *g.outcome + "' is not a declared variable");
    if (*g.outcome == g.decision || *g.outcome == g.protected_attr)
      throw RoleError("outcome must differ from the protected attribute and the decision");
  }
  for (const auto& name : {g.protected_attr, g.decision}) {
    if (g.variables[index.at(name)].domain.size() < 2)
      throw DomainError("variable '" + name + "' needs at least two domain labels");
  }

  // Kahn's algorithm; leftover nodes sit on a cycle.
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& out : children)
    for (std::size_t c : out) ++indegree[c];
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) stack.push_back(i);
  std::size_t visited = 0;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    ++visited;
    for (std::size_t c : children[v])
      if (--indegree[c] == 0) stack.push_back(c);
  }
  if (visited != n) {
    std::string members;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + g.variables[i].name;
    throw CycleError("directed cycle through {" + members + "}");
  }
}

// Validated causal graph with index-based adjacency.
class CausalGraph {
 public:
  explicit CausalGraph(GraphDecl decl) : decl_(std::move(decl)) {
    validate_graph(decl_);
    const std::size_t n = decl_.variables.size();
    index_ = detail::index_names(decl_);
    parents_.assign(n, {});
    children_.assign(n, {});
    edge_.assign(n * n, false);
    confounded_.assign(n * n, false);
    for (const auto& [from, to] : decl_.directed_edges) {
      std::size_t a = index_.at(from), b = index_.at(to);
      if (edge_[a * n + b]) continue;
      edge_[a * n + b] = true;
      parents_[b].push_back(a);
      children_[a].push_back(b);
    }
    for (auto& p : parents_) std::sort(p.begin(), p.end());
    for (auto& c : children_) std::sort(c.begin(), c.end());
    for (const auto& [x, y] : decl_.bidirected_edges) {
      std::size_t a = index_.at(x), b = index_.at(y);
      confounded_[a * n + b] = confounded_[b * n + a] = true;
    }
    protected_ = index_.at(decl_.protected_attr);
    decision_ = index_.at(decl_.decision);
    if (decl_.outcome) outcome_ = index_.at(*decl_.outcome);

    // Deterministic topological order: smallest ready index first.
    std::vector<std::size_t> indegree(n);
    for (std::size_t v = 0; v < n; ++v) indegree[v] = parents_[v].size();
    std::set<std::size_t> ready;
    for (std::size_t v = 0; v < n; ++v)
      if (indegree[v] == 0) ready.insert(v);
    while (!ready.empty()) {
      std::size_t v = *ready.begin();
      ready.erase(ready.begin());
      topo_.push_back(v);
      for (std::size_t c : children_[v])
        if (--indegree[c] == 0) ready.insert(c);
    }

    radix_.resize(n);
    place_.assign(n, 1);
    cells_ = 1;
    for (std::size_t v = n; v-- > 0;) {
      radix_[v] = decl_.variables[v].domain.size();
      place_[v] = cells_;
      if (cells_ > std::numeric_limits<std::size_t>::max() / radix_[v])
        throw CapExceededError("joint domain of the graph overflows");
      cells_ *= radix_[v];
    }
  }

  const GraphDecl& decl() const noexcept { return decl_; }
  std::size_t size() const noexcept { return decl_.variables.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw NameError("undeclared variable '" + std::string(name) + "'");
  }

  const VariableSpec& variable(std::size_t v) const { return decl_.variables.at(v); }
  const std::string& name(std::size_t v) const { return decl_.variables.at(v).name; }
  std::size_t domain_size(std::size_t v) const { return radix_.at(v); }
  const std::string& label(std::size_t v, std::size_t value) const {
    return decl_.variables.at(v).domain.at(value);
  }
  std::optional<std::size_t> find_label(std::size_t v, std::string_view label) const {
    const auto& dom = decl_.variables.at(v).domain;
    auto it = std::find(dom.begin(), dom.end(), label);
    if (it == dom.end()) return std::nullopt;
    return static_cast<std::size_t>(it - dom.begin());
  }
  std::size_t label_index(std::size_t v, std::string_view label) const {
    if (auto i = find_label(v, label)) return *i;
    throw DomainError("'" + std::string(label) + "' is not a label of variable '" + name(v) + "'");
  }

  std::span<const std::size_t> parents(std::size_t v) const { return parents_.at(v); }
  std::span<const std::size_t> children(std::size_t v) const { return children_.at(v); }
  std::span<const std::size_t> topological_order() const { return topo_; }
  bool has_edge(std::size_t from, std::size_t to) const { return edge_.at(from * size() + to); }
  bool confounded(std::size_t a, std::size_t b) const { return confounded_.at(a * size() + b); }

  std::size_t protected_index() const noexcept { return protected_; }
  std::size_t decision_index() const noexcept { return decision_; }
  std::optional<std::size_t> outcome_index() const noexcept { return outcome_; }

  // Number of full endogenous assignments. Cells are indexed lexicographically,
  // first declared variable most significant.
  std::size_t cell_count() const noexcept { return cells_; }
  std::size_t encode(const Assignment& values) const {
    std::size_t cell = 0;
    for (std::size_t v = 0; v < values.size(); ++v) cell += values[v] * place_[v];
    return cell;
  }
  Assignment decode(std::size_t cell) const {
    Assignment values(size());
    for (std::size_t v = 0; v < size(); ++v) values[v] = (cell / place_[v]) % radix_[v];
    return values;
  }
  std::size_t value_in_cell(std::size_t cell, std::size_t v) const {
    return (cell / place_[v]) % radix_[v];
  }

  bool is_ancestor(std::size_t a, std::size_t b) const {
    if (a == b) return false;
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack{a};
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t c : children_[v]) {
        if (c == b) return true;
        if (!seen[c]) {
          seen[c] = true;
          stack.push_back(c);
        }
      }
    }
    return false;
  }

  std::vector<bool> descendants_of(std::size_t a) const {
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack{a};
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t c : children_[v])
        if (!seen[c]) {
          seen[c] = true;
          stack.push_back(c);
        }
    }
    return seen;
  }

 private:
  GraphDecl decl_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<bool> edge_;
  std::vector<bool> confounded_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> radix_;
  std::vector<std::size_t> place_;
  std::size_t cells_ = 1;
  std::size_t protected_ = 0;
  std::size_t decision_ = 0;
  std::optional<std::size_t> outcome_;
};

// Builds a condition from (name, label) pairs.
inline PartialAssignment make_condition(const CausalGraph& g,
                                        const std::vector<std::pair<std::string, std::string>>& kv) {
  PartialAssignment out;
  for (const auto& [name, label] : kv) {
    std::size_t v = g.index_of(name);
    std::size_t x = g.label_index(v, label);
    for (const auto& [w, _] : out)
      if (w == v) throw ConditionError("variable '" + name + "' conditioned twice");
    out.emplace_back(v, x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Joint table P(V). Zero cells are not stored.
class ObservationalDistribution {
 public:
  ObservationalDistribution(std::size_t cell_count, std::map<std::size_t, double> cells,
                            double tolerance = kIngestTolerance)
      : cell_count_(cell_count) {
    double total = 0.0;
    for (const auto& [cell, p] : cells) {
      if (cell >= cell_count) throw DistributionError("cell index out of range");
      if (!std::isfinite(p) || p < 0.0) throw DistributionError("probabilities must be finite and nonnegative");
      total += p;
      if (p > 0.0) cells_.emplace(cell, p);
    }
    if (std::abs(total - 1.0) > tolerance)
      throw DistributionError("probabilities sum to " + std::to_string(total) + ", not 1");
  }

  static ObservationalDistribution from_dense(const std::vector<double>& table,
                                              double tolerance = kIngestTolerance) {
    std::map<std::size_t, double> cells;
    for (std::size_t i = 0; i < table.size(); ++i)
      if (table[i] != 0.0) cells.emplace(i, table[i]);
    return ObservationalDistribution(table.size(), std::move(cells), tolerance);
  }

  std::size_t cell_count() const noexcept { return cell_count_; }
  const std::map<std::size_t, double>& cells() const noexcept { return cells_; }
  double prob(std::size_t cell) const {
    auto it = cells_.find(cell);
    return it == cells_.end() ? 0.0 : it->second;
  }
  std::vector<double> dense() const {
    std::vector<double> out(cell_count_, 0.0);
    for (const auto& [cell, p] : cells_) out[cell] = p;
    return out;
  }

  // Sample counts when the table came from data; probabilities are count / total.
  const std::map<std::size_t, std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t sample_size() const noexcept { return total_; }

  double marginal(const CausalGraph& g, const PartialAssignment& condition) const {
    double p = 0.0;
    for (const auto& [cell, q] : cells_) {
      bool ok = true;
      for (const auto& [v, x] : condition)
        if (g.value_in_cell(cell, v) != x) {
          ok = false;
          break;
        }
      if (ok) p += q;
    }
    return p;
  }

  // Marginal probability of a subset of variables taking the values in `values`.
  double marginal(const CausalGraph& g, std::span<const std::size_t> vars, const Assignment& values) const {
    PartialAssignment cond;
    for (std::size_t v : vars) cond.emplace_back(v, values[v]);
    return marginal(g, cond);
  }

  static ObservationalDistribution from_counts(std::size_t cell_count,
                                               std::map<std::size_t, std::uint64_t> counts) {
    std::uint64_t total = 0;
    for (const auto& [_, c] : counts) total += c;
    if (total == 0) throw EmptyDataError("no records");
    std::map<std::size_t, double> cells;
    for (const auto& [cell, c] : counts)
      cells.emplace(cell, static_cast<double>(c) / static_cast<double>(total));
    ObservationalDistribution dist(cell_count, std::move(cells), kIngestTolerance);
    dist.counts_ = std::move(counts);
    dist.total_ = total;
    return dist;
  }

 private:
  std::size_t cell_count_;
  std::map<std::size_t, double> cells_;
  std::map<std::size_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Records are label rows in the graph's declaration order.
inline ObservationalDistribution empirical_distribution(const std::vector<std::vector<std::string>>& records,
                                                        const CausalGraph& g) {
  if (records.empty()) throw EmptyDataError("no records");
  std::map<std::size_t, std::uint64_t> counts;
  Assignment values(g.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != g.size())
      throw UnknownLabelError(r, "expected " + std::to_string(g.size()) + " values, got " +
                                     std::to_string(rec.size()));
    for (std::size_t v = 0; v < g.size(); ++v) {
      auto x = g.find_label(v, rec[v]);
      if (!x) throw UnknownLabelError(r, "'" + rec[v] + "' is not a label of '" + g.name(v) + "'");
      values[v] = *x;
    }
    ++counts[g.encode(values)];
  }
  return ObservationalDistribution::from_counts(g.cell_count(), std::move(counts));
}

inline ObservationalDistribution empirical_distribution(const std::vector<Assignment>& records,
                                                        const CausalGraph& g) {
  if (records.empty()) throw EmptyDataError("no records");
  std::map<std::size_t, std::uint64_t> counts;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != g.size()) throw UnknownLabelError(r, "wrong number of values");
    for (std::size_t v = 0; v < g.size(); ++v)
      if (rec[v] >= g.domain_size(v))
        throw UnknownLabelError(r, "value index out of range for '" + g.name(v) + "'");
    ++counts[g.encode(rec)];
  }
  return ObservationalDistribution::from_counts(g.cell_count(), std::move(counts));
}

struct ExogenousBlock {
  std::string id;
  std::vector<double> probabilities;
  std::size_t size() const noexcept { return probabilities.size(); }
};

// Fully specified SCM over finite exogenous blocks. Each endogenous variable is
// fed by exactly one block; variables sharing a block are confounded.
class OracleScm {
 public:
  // functions[v] is a flat truth table indexed by
  // parent_assignment * block_size + block_value, parents in canonical order.
  OracleScm(CausalGraph graph, std::vector<ExogenousBlock> blocks, std::vector<std::size_t> wiring,
            std::vector<std::vector<std::size_t>> functions)
      : graph_(std::move(graph)),
        blocks_(std::move(blocks)),
        wiring_(std::move(wiring)),
        functions_(std::move(functions)) {
    const std::size_t n = graph_.size();
    for (const auto& b : blocks_) {
      if (b.probabilities.empty()) throw DistributionError("block '" + b.id + "' has an empty domain");
      double total = 0.0;
      for (double p : b.probabilities) {
        if (!std::isfinite(p) || p < 0.0) throw DistributionError("block '" + b.id + "' has a negative probability");
        total += p;
      }
      if (std::abs(total - 1.0) > kOracleTolerance)
        throw DistributionError("block '" + b.id + "' probabilities sum to " + std::to_string(total));
    }
    if (wiring_.size() != n || functions_.size() != n)
      throw DistributionError("oracle must wire and define every endogenous variable");
    parent_place_.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      if (wiring_[v] >= blocks_.size())
        throw NameError("variable '" + graph_.name(v) + "' is wired to an unknown block");
      auto pa = graph_.parents(v);
      std::size_t configs = 1;
      parent_place_[v].assign(pa.size(), 1);
      for (std::size_t k = pa.size(); k-- > 0;) {
        parent_place_[v][k] = configs;
        configs *= graph_.domain_size(pa[k]);
      }
      std::size_t expected = configs * blocks_[wiring_[v]].size();
      if (functions_[v].size() != expected)
        throw DistributionError("truth table of '" + graph_.name(v) + "' has " +
                                std::to_string(functions_[v].size()) + " entries, expected " +
                                std::to_string(expected));
      for (std::size_t x : functions_[v])
        if (x >= graph_.domain_size(v))
          throw DistributionError("truth table of '" + graph_.name(v) + "' has an out-of-domain value");
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        bool shared = wiring_[a] == wiring_[b];
        if (shared != graph_.confounded(a, b))
          throw ConfoundingError("variables '" + graph_.name(a) + "' and '" + graph_.name(b) +
                                 (shared ? "' share an exogenous block but are not declared confounded"
                                         : "' are declared confounded but do not share an exogenous block"));
      }
  }

  const CausalGraph& graph() const noexcept { return graph_; }
  const std::vector<ExogenousBlock>& blocks() const noexcept { return blocks_; }
  const std::vector<std::size_t>& wiring() const noexcept { return wiring_; }
  const std::vector<std::vector<std::size_t>>& functions() const noexcept { return functions_; }

  std::size_t parent_config(std::size_t v, const Assignment& values) const {
    auto pa = graph_.parents(v);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < pa.size(); ++k) idx += values[pa[k]] * parent_place_[v][k];
    return idx;
  }
  std::size_t parent_config_count(std::size_t v) const {
    return functions_[v].size() / blocks_[wiring_[v]].size();
  }

  // f_V(parent configuration, block value).
  std::size_t apply(std::size_t v, std::size_t parent_config, std::size_t block_value) const {
    return functions_[v][parent_config * blocks_[wiring_[v]].size() + block_value];
  }

  std::uint64_t joint_block_count() const {
    std::uint64_t total = 1;
    for (const auto& b : blocks_) {
      if (total > std::numeric_limits<std::uint64_t>::max() / b.size())
        return std::numeric_limits<std::uint64_t>::max();
      total *= b.size();
    }
    return total;
  }

  // Factual evaluation of every endogenous variable under joint block values u.
  Assignment evaluate(std::span<const std::size_t> u) const {
    Assignment values(graph_.size(), 0);
    for (std::size_t v : graph_.topological_order())
      values[v] = apply(v, parent_config(v, values), u[wiring_[v]]);
    return values;
  }

 private:
  CausalGraph graph_;
  std::vector<ExogenousBlock> blocks_;
  std::vector<std::size_t> wiring_;
  std::vector<std::vector<std::size_t>> functions_;
  std::vector<std::vector<std::size_t>> parent_place_;
};

inline constexpr std::uint64_t kMaxJointBlocks = 10'000'000;

// Calls fn(u, weight) for every joint block value; u is mixed radix with the
// first block most significant.
template <typename Fn>
void for_each_block_value(const OracleScm& scm, Fn&& fn) {
  std::uint64_t total = scm.joint_block_count();
  if (total > kMaxJointBlocks)
    throw CapExceededError("oracle enumeration needs " + std::to_string(total) +
                           " joint block values (limit 10^7)");
  const auto& blocks = scm.blocks();
  std::vector<std::size_t> u(blocks.size(), 0);
  for (std::uint64_t i = 0; i < total; ++i) {
    double w = 1.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) w *= blocks[b].probabilities[u[b]];
    fn(std::span<const std::size_t>(u), w);
    for (std::size_t b = blocks.size(); b-- > 0;) {
      if (++u[b] < blocks[b].size()) break;
      u[b] = 0;
    }
  }
}

inline ObservationalDistribution model_to_distribution(const OracleScm& scm) {
  const auto& g = scm.graph();
  std::vector<double> table(g.cell_count(), 0.0);
  for_each_block_value(scm, [&](std::span<const std::size_t> u, double w) {
    if (w == 0.0) return;
    table[g.encode(scm.evaluate(u))] += w;
  });
  return ObservationalDistribution::from_dense(table, kOracleTolerance);
}

}  // namespace pcbound
