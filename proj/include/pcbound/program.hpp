#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcbound/effects.hpp"
#include "pcbound/error.hpp"
#include "pcbound/model.hpp"
#include "pcbound/response.hpp"

namespace pcbound {

enum class ProgramMode { FullJoint, Factored };

inline const char* to_string(ProgramMode m) { return m == ProgramMode::FullJoint ? "full-joint" : "factored"; }

// Variables that carry explicit response variables in a full-joint program.
struct ActiveSet {
  std::vector<std::size_t> variables;  // ascending

  bool contains(std::size_t v) const { return std::binary_search(variables.begin(), variables.end(), v); }
  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

inline ActiveSet full_active_set(const CausalGraph& g) {
  ActiveSet out;
  for (std::size_t v = 0; v < g.size(); ++v) out.variables.push_back(v);
  return out;
}

// Smallest set containing the decision, witnesses, every member of a
// confounded component of size >= 2, the conditioned variables, and every node
// on a causal path from S to the decision.
inline ActiveSet reduce_active_set(const CausalGraph& g, const PceQuery& query, const FactorizationBlocks& blocks) {
  check_query(g, query);
  std::vector<bool> keep(g.size(), false);
  keep[g.decision_index()] = true;
  for (std::size_t w : partition_nodes(g, query.pi).witness) keep[w] = true;
  for (const auto& comp : blocks.components)
    if (comp.size() >= 2)
      for (std::size_t v : comp) keep[v] = true;
  for (const auto& [v, _] : query.condition) keep[v] = true;
  for (const auto& p : enumerate_causal_paths(g).paths)
    for (std::size_t v : p) keep[v] = true;
  ActiveSet out;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (keep[v]) out.variables.push_back(v);
  return out;
}

struct SparseRow {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
  double rhs = 0.0;
};

// Probabilities enter constraints rounded to a 1e-12 grid.
inline double round_rhs(double p) { return std::round(p * 1e12) / 1e12; }

struct FactorBlock {
  std::vector<std::size_t> variables;
  ProfileSpace space;
  // support[cell]: local response indices whose block indicator is 1 at that cell.
  std::vector<std::vector<std::uint32_t>> support;
  // Linear constraints on this block alone (c-component factorization of P(v))
  // plus normalization; used to find feasible starting points.
  std::vector<SparseRow> local_rows;
  bool consistent = true;
};

struct BoundProgram {
  ProgramMode mode = ProgramMode::FullJoint;
  ActiveSet active;
  bool reduced = false;
  ProfileSpace space;  // joint space over the active variables
  CoefficientVector objective;
  // Full-joint: one row per full assignment (cell order), then normalization.
  std::vector<SparseRow> rows;
  std::vector<double> observed;  // P(v) per cell, rounded
  double condition_mass = 0.0;

  // Factored mode only.
  std::vector<FactorBlock> blocks;
  std::vector<std::vector<std::uint32_t>> block_local;  // [block][joint index] -> local index

  std::uint64_t column_count() const { return space.size(); }

  void add_equality(SparseRow row) {
    if (mode != ProgramMode::FullJoint) throw Error("extra equalities are only supported in full-joint mode");
    rows.push_back(std::move(row));
  }
};

struct ProgramOptions {
  std::uint64_t profile_cap = kDefaultProfileCap;
  bool allow_reduction = true;          // reduce automatically when the full space exceeds the cap
  bool force_reduction = false;         // always use the minimal active set
  std::optional<ActiveSet> active;      // explicit active set (must contain the minimal one)
};

namespace detail {

// P(x | pa) for one variable, flat [config * |dom| + x]; uniform where P(pa) = 0.
inline std::vector<double> conditional_table(const CausalGraph& g, const ObservationalDistribution& obs,
                                             const ResponseFunctionTable& t) {
  const std::size_t v = t.variable();
  const std::size_t d = g.domain_size(v);
  std::vector<double> joint(t.parent_config_count() * d, 0.0);
  for (const auto& [cell, p] : obs.cells()) {
    Assignment values = g.decode(cell);
    joint[t.parent_config(values) * d + values[v]] += p;
  }
  for (std::size_t cfg = 0; cfg < t.parent_config_count(); ++cfg) {
    double mass = 0.0;
    for (std::size_t x = 0; x < d; ++x) mass += joint[cfg * d + x];
    for (std::size_t x = 0; x < d; ++x)
      joint[cfg * d + x] = mass > 0.0 ? joint[cfg * d + x] / mass : 1.0 / static_cast<double>(d);
  }
  return joint;
}

}  // namespace detail

inline BoundProgram build_full_joint(const CausalGraph& g, const ObservationalDistribution& obs,
                                     const PceQuery& query, const ResponseModel& tables,
                                     const ProgramOptions& options = {}) {
  check_query(g, query);
  if (obs.cell_count() != g.cell_count()) throw DistributionError("distribution does not match the graph");
  const double p_o = obs.marginal(g, query.condition);
  if (!(p_o > 0.0)) throw ZeroConditionError("P(o) = 0 under the observational distribution");

  BoundProgram prog;
  prog.mode = ProgramMode::FullJoint;
  prog.condition_mass = p_o;

  const ActiveSet minimal = reduce_active_set(g, query, confounded_components(g));
  if (options.active) {
    for (std::size_t v : minimal.variables)
      if (!options.active->contains(v))
        throw Error("active set must contain '" + g.name(v) + "'");
    prog.active = *options.active;
  } else if (options.force_reduction) {
    prog.active = minimal;
  } else {
    prog.active = full_active_set(g);
    try {
      (void)ProfileSpace(prog.active.variables, tables, options.profile_cap);
    } catch (const CapExceededError&) {
      if (!options.allow_reduction) throw;
      prog.active = minimal;
    }
  }
  prog.reduced = prog.active.variables.size() < g.size();
  prog.space = ProfileSpace(prog.active.variables, tables, options.profile_cap);

  const std::size_t n = g.size();
  std::vector<std::vector<double>> conditionals(n);
  for (std::size_t v = 0; v < n; ++v)
    if (!prog.active.contains(v)) conditionals[v] = detail::conditional_table(g, obs, tables.table(v));

  const std::uint64_t columns = prog.space.size();
  const std::size_t cells = g.cell_count();
  const std::size_t y = g.decision_index();
  EdgeActivation edges(g, query.pi);
  auto topo = g.topological_order();

  prog.objective.assign(columns, 0.0);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> row_entries(cells);
  ResponseProfile r(n, 0);
  WorldValues w{Assignment(n), Assignment(n), Assignment(n)};
  std::map<std::size_t, double> leaves;

  // Active variables follow their response function; the others branch over
  // their observed conditional distribution and take the same value in every world.
  auto descend = [&](auto&& self, std::size_t pos, double weight, double& objective) -> void {
    if (pos == topo.size()) {
      leaves[g.encode(w.factual)] += weight;
      if (matches(w.factual, query.condition)) {
        int diff = int(w.treated[y] == query.y_target) - int(w.reference[y] == query.y_target);
        objective += weight * diff / p_o;
      }
      return;
    }
    std::size_t v = topo[pos];
    const auto& t = tables.table(v);
    if (prog.active.contains(v)) {
      evaluate_node(g, t, edges, query.s0, query.s1, v, r[v], w);
      self(self, pos + 1, weight, objective);
      return;
    }
    const std::size_t d = g.domain_size(v);
    const std::size_t cfg = t.parent_config(w.factual);
    for (std::size_t x = 0; x < d; ++x) {
      double p = conditionals[v][cfg * d + x];
      if (p == 0.0) continue;
      w.factual[v] = w.reference[v] = w.treated[v] = x;
      self(self, pos + 1, weight * p, objective);
    }
  };

  for (std::uint64_t col = 0; col < columns; ++col) {
    prog.space.decode(col, r);
    leaves.clear();
    double objective = 0.0;
    descend(descend, 0, 1.0, objective);
    prog.objective[col] = objective;
    for (const auto& [cell, weight] : leaves)
      row_entries[cell].emplace_back(static_cast<std::uint32_t>(col), weight);
  }

  prog.observed.resize(cells);
  prog.rows.resize(cells + 1);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    auto& row = prog.rows[cell];
    for (const auto& [col, coef] : row_entries[cell]) {
      row.index.push_back(col);
      row.value.push_back(coef);
    }
    prog.observed[cell] = round_rhs(obs.prob(cell));
    row.rhs = prog.observed[cell];
  }
  auto& norm = prog.rows[cells];
  norm.index.resize(columns);
  norm.value.assign(columns, 1.0);
  for (std::uint64_t col = 0; col < columns; ++col) norm.index[col] = static_cast<std::uint32_t>(col);
  norm.rhs = 1.0;
  return prog;
}

namespace detail {

// Prefix marginals P(v_{T[0]}, ..., v_{T[i-1]}) along the topological order T.
class PrefixMarginals {
 public:
  PrefixMarginals(const CausalGraph& g, const ObservationalDistribution& obs)
      : g_(g), topo_(g.topological_order().begin(), g.topological_order().end()) {
    maps_.resize(topo_.size() + 1);
    for (const auto& [cell, p] : obs.cells()) {
      Assignment values = g.decode(cell);
      for (std::size_t i = 0; i <= topo_.size(); ++i) maps_[i][key(values, i)] += p;
    }
  }

  double operator()(const Assignment& values, std::size_t length) const {
    auto it = maps_[length].find(key(values, length));
    return it == maps_[length].end() ? 0.0 : it->second;
  }

  std::size_t position(std::size_t v) const {
    return static_cast<std::size_t>(std::find(topo_.begin(), topo_.end(), v) - topo_.begin());
  }

 private:
  std::size_t key(const Assignment& values, std::size_t length) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < length; ++i) k = k * g_.domain_size(topo_[i]) + values[topo_[i]];
    return k;
  }

  const CausalGraph& g_;
  std::vector<std::size_t> topo_;
  std::vector<std::map<std::size_t, double>> maps_;
};

}  // namespace detail

// Product-form program: one response distribution per confounded component.
// Constraints are P(v) = ∏_blocks L_b(v) with L_b linear in block b.
inline BoundProgram build_factored(const CausalGraph& g, const ObservationalDistribution& obs,
                                   const PceQuery& query, const ResponseModel& tables,
                                   const FactorizationBlocks& blocks, const ProgramOptions& options = {}) {
  check_query(g, query);
  if (obs.cell_count() != g.cell_count()) throw DistributionError("distribution does not match the graph");
  BoundProgram prog;
  prog.mode = ProgramMode::Factored;
  prog.active = full_active_set(g);
  prog.space = full_profile_space(g, tables, options.profile_cap);
  prog.objective = pce_objective(query, obs, g, tables, options.profile_cap);
  prog.condition_mass = obs.marginal(g, query.condition);
  const std::size_t cells = g.cell_count();
  prog.observed.resize(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) prog.observed[cell] = round_rhs(obs.prob(cell));

  detail::PrefixMarginals prefix(g, obs);
  ResponseProfile r(g.size(), 0);
  for (const auto& members : blocks.components) {
    FactorBlock block;
    block.variables = members;
    block.space = ProfileSpace(members, tables, options.profile_cap);
    block.support.resize(cells);
    std::vector<std::size_t> positions;
    for (std::size_t v : members) positions.push_back(prefix.position(v));

    std::map<std::vector<std::uint32_t>, double> factor_rows;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      Assignment values = g.decode(cell);
      for (std::uint64_t local = 0; local < block.space.size(); ++local) {
        block.space.decode(local, r);
        bool hit = true;
        for (std::size_t v : members) {
          const auto& t = tables.table(v);
          if (!indicator(values[v], t.parent_config(values), r[v], t)) {
            hit = false;
            break;
          }
        }
        if (hit) block.support[cell].push_back(static_cast<std::uint32_t>(local));
      }
      double q = 1.0;
      bool defined = true;
      for (std::size_t pos : positions) {
        double before = prefix(values, pos);
        if (!(before > 0.0)) {
          defined = false;
          break;
        }
        q *= prefix(values, pos + 1) / before;
      }
      if (!defined) continue;
      auto [it, inserted] = factor_rows.emplace(block.support[cell], q);
      if (!inserted && std::abs(it->second - q) > kIngestTolerance) block.consistent = false;
    }
    for (const auto& [support, q] : factor_rows) {
      SparseRow row;
      row.index = support;
      row.value.assign(support.size(), 1.0);
      row.rhs = round_rhs(q);
      block.local_rows.push_back(std::move(row));
    }
    SparseRow norm;
    for (std::uint64_t local = 0; local < block.space.size(); ++local) {
      norm.index.push_back(static_cast<std::uint32_t>(local));
      norm.value.push_back(1.0);
    }
    norm.rhs = 1.0;
    block.local_rows.push_back(std::move(norm));
    prog.blocks.push_back(std::move(block));
  }

  prog.block_local.assign(prog.blocks.size(), std::vector<std::uint32_t>(prog.space.size()));
  for (std::uint64_t joint = 0; joint < prog.space.size(); ++joint) {
    prog.space.decode(joint, r);
    for (std::size_t b = 0; b < prog.blocks.size(); ++b)
      prog.block_local[b][joint] = static_cast<std::uint32_t>(prog.blocks[b].space.encode(r));
  }
  return prog;
}

enum class Sense { Minimize, Maximize };

// CPLEX LP text of a full-joint program.
inline std::string export_lp(const BoundProgram& prog, Sense sense) {
  if (prog.mode != ProgramMode::FullJoint) throw Error("LP export supports full-joint programs only");
  std::ostringstream out;
  char buf[64];
  auto term = [&](double coef, std::uint64_t col, bool first) {
    if (coef < 0)
      std::snprintf(buf, sizeof buf, " - %.17g r%llu", -coef, static_cast<unsigned long long>(col));
    else
      std::snprintf(buf, sizeof buf, "%s%.17g r%llu", first ? " " : " + ", coef,
                    static_cast<unsigned long long>(col));
    return std::string(buf);
  };
  out << "\\ bounding program over " << prog.column_count() << " response profiles\n";
  out << (sense == Sense::Maximize ? "Maximize\n" : "Minimize\n") << " obj:";
  std::size_t written = 0;
  for (std::uint64_t col = 0; col < prog.objective.size(); ++col) {
    if (prog.objective[col] == 0.0) continue;
    out << term(prog.objective[col], col, written == 0);
    if (++written % 6 == 0) out << "\n";
  }
  if (written == 0) out << " 0 r0";
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < prog.rows.size(); ++i) {
    const auto& row = prog.rows[i];
    if (row.index.empty()) {
      if (row.rhs != 0.0) out << " c" << i << ": 0 r0 = " << row.rhs << "\n";
      continue;
    }
    out << " c" << i << ":";
    for (std::size_t k = 0; k < row.index.size(); ++k) {
      out << term(row.value[k], row.index[k], k == 0);
      if ((k + 1) % 6 == 0 && k + 1 < row.index.size()) out << "\n";
    }
    std::snprintf(buf, sizeof buf, " = %.17g\n", row.rhs);
    out << buf;
  }
  out << "End\n";
  return out.str();
}

}  // namespace pcbound
