#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "pcbound/effects.hpp"
#include "pcbound/error.hpp"
#include "pcbound/model.hpp"
#include "pcbound/parallel.hpp"
#include "pcbound/program.hpp"
#include "pcbound/random.hpp"
#include "pcbound/response.hpp"
#include "pcbound/simplex.hpp"

namespace pcbound {

struct SolverOptions {
  SimplexTolerances simplex;
  // Maximum constraint residual accepted for a returned witness.
  double witness_tolerance = 1e-8;
  // Merge columns with identical constraint coefficients, keeping the best
  // objective for the requested sense. Exact for any LP.
  bool presolve = true;
  // Factored mode: stop sweeping once a sweep improves by less than this.
  double improvement = 1e-8;
  std::size_t max_sweeps = 200;
  // Factored mode: random vertices mixed into each starting point.
  std::size_t start_vertices = 4;
};

struct SolverDiagnostics {
  std::size_t iterations = 0;
  std::size_t phase1_iterations = 0;
  std::size_t redundant_rows = 0;
  bool bland = false;
  std::size_t columns = 0;
  std::size_t rows = 0;
  std::size_t presolved_columns = 0;
  std::size_t presolved_rows = 0;
  double residual = 0.0;
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> witness;
  SolverDiagnostics diagnostics;
};

inline double row_residual(const std::vector<SparseRow>& rows, const std::vector<double>& x) {
  double worst = 0.0;
  for (const auto& row : rows) {
    double s = 0.0;
    for (std::size_t k = 0; k < row.index.size(); ++k) s += row.value[k] * x[row.index[k]];
    worst = std::max(worst, std::abs(s - row.rhs));
  }
  return worst;
}

// Solves  min/max c'x  s.t.  rows, x >= 0  over n columns.
inline LpSolution solve_rows(std::size_t n, const std::vector<SparseRow>& rows, const std::vector<double>& c,
                             Sense sense, const SolverOptions& options = {}) {
  LpSolution out;
  out.diagnostics.columns = n;
  out.diagnostics.rows = rows.size();

  using Column = std::vector<std::pair<std::uint32_t, double>>;
  std::vector<Column> columns(n);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].index.size(); ++k)
      if (rows[i].value[k] != 0.0) columns[rows[i].index[k]].emplace_back(static_cast<std::uint32_t>(i), rows[i].value[k]);

  auto better = [&](double a, double b) { return sense == Sense::Maximize ? a > b : a < b; };
  std::vector<std::size_t> kept;
  if (options.presolve) {
    std::map<Column, std::size_t> groups;
    for (std::size_t j = 0; j < n; ++j) {
      auto [it, inserted] = groups.emplace(columns[j], kept.size());
      if (inserted)
        kept.push_back(j);
      else if (better(c[j], c[kept[it->second]]))
        kept[it->second] = j;
    }
    std::sort(kept.begin(), kept.end());
  } else {
    kept.resize(n);
    for (std::size_t j = 0; j < n; ++j) kept[j] = j;
  }

  std::vector<bool> used(rows.size(), false);
  for (std::size_t j : kept)
    for (const auto& [i, _] : columns[j]) used[i] = true;
  std::vector<std::size_t> live_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (used[i])
      live_rows.push_back(i);
    else if (std::abs(rows[i].rhs) > options.simplex.feasibility)
      return out;  // empty row with nonzero right-hand side
  }
  out.diagnostics.presolved_columns = kept.size();
  out.diagnostics.presolved_rows = live_rows.size();

  const std::size_t m = live_rows.size(), k = kept.size();
  std::vector<std::size_t> row_pos(rows.size(), 0);
  for (std::size_t r = 0; r < m; ++r) row_pos[live_rows[r]] = r;
  std::vector<double> a(m * k, 0.0), b(m), cost(k);
  for (std::size_t r = 0; r < m; ++r) b[r] = rows[live_rows[r]].rhs;
  for (std::size_t col = 0; col < k; ++col) {
    for (const auto& [i, v] : columns[kept[col]]) a[row_pos[i] * k + col] = v;
    cost[col] = sense == Sense::Maximize ? -c[kept[col]] : c[kept[col]];
  }

  DenseSimplex simplex(m, k, std::move(a), std::move(b), std::move(cost), options.simplex);
  SimplexResult res = simplex.solve();
  out.status = res.status;
  out.diagnostics.iterations = res.iterations;
  out.diagnostics.phase1_iterations = res.phase1_iterations;
  out.diagnostics.redundant_rows = res.redundant_rows;
  out.diagnostics.bland = res.bland;
  if (res.status != LpStatus::Optimal) return out;

  out.witness.assign(n, 0.0);
  for (std::size_t col = 0; col < k; ++col) out.witness[kept[col]] = res.x[col];
  double value = 0.0;
  for (std::size_t j = 0; j < n; ++j) value += c[j] * out.witness[j];
  out.value = value;
  out.diagnostics.residual = row_residual(rows, out.witness);
  if (out.diagnostics.residual > options.witness_tolerance)
    throw NumericalError("simplex witness violates constraints by " + std::to_string(out.diagnostics.residual));
  return out;
}

inline LpSolution solve_lp(const BoundProgram& prog, Sense sense, const SolverOptions& options = {}) {
  if (prog.mode != ProgramMode::FullJoint) throw Error("solve_lp needs a full-joint program");
  return solve_rows(prog.column_count(), prog.rows, prog.objective, sense, options);
}

struct FactoredSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> blocks;  // one response distribution per block
  std::vector<double> restart_values;       // NaN where a restart found no feasible start
  std::size_t best_restart = 0;
  std::size_t sweeps = 0;
  double residual = 0.0;
  // The value is attained by the witness, so it only bounds the true optimum
  // from the inside (below for maximization, above for minimization).
  bool one_sided = true;
};

namespace detail {

// L_b(cell) for every block.
inline std::vector<std::vector<double>> block_forms(const BoundProgram& prog,
                                                    const std::vector<std::vector<double>>& p) {
  std::vector<std::vector<double>> forms(prog.blocks.size(), std::vector<double>(prog.observed.size(), 0.0));
  for (std::size_t b = 0; b < prog.blocks.size(); ++b)
    for (std::size_t cell = 0; cell < prog.observed.size(); ++cell)
      for (std::uint32_t r : prog.blocks[b].support[cell]) forms[b][cell] += p[b][r];
  return forms;
}

inline double product_residual(const BoundProgram& prog, const std::vector<std::vector<double>>& p) {
  auto forms = block_forms(prog, p);
  double worst = 0.0;
  for (std::size_t cell = 0; cell < prog.observed.size(); ++cell) {
    double prod = 1.0;
    for (const auto& f : forms) prod *= f[cell];
    worst = std::max(worst, std::abs(prod - prog.observed[cell]));
  }
  double mass_error = 0.0;
  for (const auto& block : p) {
    double s = 0.0;
    for (double x : block) s += x;
    mass_error = std::max(mass_error, std::abs(s - 1.0));
  }
  return std::max(worst, mass_error);
}

inline double factored_value(const BoundProgram& prog, const std::vector<std::vector<double>>& p) {
  double total = 0.0;
  for (std::size_t joint = 0; joint < prog.objective.size(); ++joint) {
    double c = prog.objective[joint];
    if (c == 0.0) continue;
    double w = 1.0;
    for (std::size_t b = 0; b < p.size() && w != 0.0; ++b) w *= p[b][prog.block_local[b][joint]];
    total += c * w;
  }
  return total;
}

// Random feasible point of one block's own constraints: a Dirichlet(1)
// mixture of vertices maximizing Dirichlet(1) directions.
inline std::optional<std::vector<double>> random_block_start(const FactorBlock& block, Rng& rng,
                                                             const SolverOptions& options) {
  if (!block.consistent) return std::nullopt;
  const std::size_t n = block.space.size();
  const std::size_t k = std::max<std::size_t>(1, options.start_vertices);
  std::vector<double> weights = dirichlet_ones(rng, k);
  std::vector<double> point(n, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> direction = dirichlet_ones(rng, n);
    LpSolution vertex;
    try {
      vertex = solve_rows(n, block.local_rows, direction, Sense::Maximize, options);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
    if (vertex.status != LpStatus::Optimal) return std::nullopt;
    for (std::size_t r = 0; r < n; ++r) point[r] += weights[t] * vertex.witness[r];
  }
  return point;
}

// Improves block k with all other blocks held fixed. Returns true if it moved.
inline bool improve_block(const BoundProgram& prog, std::size_t k, Sense sense, std::vector<std::vector<double>>& p,
                          double& value, const SolverOptions& options) {
  const auto& block = prog.blocks[k];
  const std::size_t n = block.space.size();
  auto forms = block_forms(prog, p);
  std::vector<SparseRow> rows;
  for (std::size_t cell = 0; cell < prog.observed.size(); ++cell) {
    double coef = 1.0;
    for (std::size_t j = 0; j < forms.size(); ++j)
      if (j != k) coef *= forms[j][cell];
    if (coef == 0.0) {
      if (std::abs(prog.observed[cell]) > options.simplex.feasibility) return false;
      continue;
    }
    SparseRow row;
    row.index = block.support[cell];
    row.value.assign(row.index.size(), coef);
    row.rhs = prog.observed[cell];
    rows.push_back(std::move(row));
  }
  rows.push_back(block.local_rows.back());  // normalization

  std::vector<double> objective(n, 0.0);
  for (std::size_t joint = 0; joint < prog.objective.size(); ++joint) {
    double c = prog.objective[joint];
    if (c == 0.0) continue;
    double w = c;
    for (std::size_t j = 0; j < p.size() && w != 0.0; ++j)
      if (j != k) w *= p[j][prog.block_local[j][joint]];
    objective[prog.block_local[k][joint]] += w;
  }

  LpSolution sol;
  try {
    sol = solve_rows(n, rows, objective, sense, options);
  } catch (const NumericalError&) {
    return false;
  }
  if (sol.status != LpStatus::Optimal) return false;
  std::vector<double> saved = std::move(p[k]);
  p[k] = sol.witness;
  double candidate = factored_value(prog, p);
  bool improves = sense == Sense::Maximize ? candidate > value : candidate < value;
  if (!improves || product_residual(prog, p) > options.witness_tolerance) {
    p[k] = std::move(saved);
    return false;
  }
  value = candidate;
  return true;
}

}  // namespace detail

// Block-coordinate optimization of a factored program from `restarts` random
// feasible starts. Deterministic for a given seed regardless of thread count.
inline FactoredSolution solve_factored(const BoundProgram& prog, Sense sense, std::size_t restarts,
                                       std::uint64_t seed, const SolverOptions& options = {}) {
  if (prog.mode != ProgramMode::Factored) throw Error("solve_factored needs a factored program");
  if (restarts == 0) throw Error("at least one restart is required");

  struct Run {
    bool feasible = false;
    double value = 0.0;
    std::vector<std::vector<double>> p;
    std::size_t sweeps = 0;
  };
  std::vector<Run> runs(restarts);
  parallel_for(restarts, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    Run& run = runs[i];
    for (const auto& block : prog.blocks) {
      auto start = detail::random_block_start(block, rng, options);
      if (!start) return;
      run.p.push_back(std::move(*start));
    }
    if (detail::product_residual(prog, run.p) > options.witness_tolerance) return;
    run.feasible = true;
    run.value = detail::factored_value(prog, run.p);
    for (run.sweeps = 0; run.sweeps < options.max_sweeps;) {
      double before = run.value;
      for (std::size_t k = 0; k < prog.blocks.size(); ++k)
        detail::improve_block(prog, k, sense, run.p, run.value, options);
      ++run.sweeps;
      if (std::abs(run.value - before) < options.improvement) break;
    }
  });

  FactoredSolution out;
  out.restart_values.assign(restarts, std::numeric_limits<double>::quiet_NaN());
  bool found = false;
  for (std::size_t i = 0; i < restarts; ++i) {
    if (!runs[i].feasible) continue;
    out.restart_values[i] = runs[i].value;
    out.sweeps += runs[i].sweeps;
    bool take = !found || (sense == Sense::Maximize ? runs[i].value > out.value : runs[i].value < out.value);
    if (take) {
      found = true;
      out.value = runs[i].value;
      out.best_restart = i;
    }
  }
  if (!found) return out;
  out.status = LpStatus::Optimal;
  out.blocks = std::move(runs[out.best_restart].p);
  out.residual = detail::product_residual(prog, out.blocks);
  return out;
}

enum class BoundMode { FullJoint, Factored, Both };

inline const char* to_string(BoundMode m) {
  switch (m) {
    case BoundMode::FullJoint: return "full";
    case BoundMode::Factored: return "factored";
    case BoundMode::Both: return "both";
  }
  return "full";
}

struct BoundOptions {
  BoundMode mode = BoundMode::FullJoint;
  std::size_t restarts = 16;
  std::uint64_t seed = 0;
  std::uint64_t response_cap = kDefaultResponseCap;
  ProgramOptions program;
  SolverOptions solver;
};

struct FullJointBounds {
  double lb = std::numeric_limits<double>::quiet_NaN();
  double ub = std::numeric_limits<double>::quiet_NaN();
  LpSolution lower;
  LpSolution upper;
  ActiveSet active;
  bool reduced = false;
  std::uint64_t columns = 0;
  double condition_mass = 0.0;
};

struct FactoredBounds {
  double lb = std::numeric_limits<double>::quiet_NaN();
  double ub = std::numeric_limits<double>::quiet_NaN();
  FactoredSolution lower;
  FactoredSolution upper;
  std::size_t restarts = 0;
  std::uint64_t seed = 0;
};

struct BoundsResult {
  FullJointBounds full;
  std::optional<FactoredBounds> factored;

  bool feasible() const {
    return full.lower.status == LpStatus::Optimal && full.upper.status == LpStatus::Optimal;
  }
};

inline BoundsResult bound_pce(const CausalGraph& g, const ObservationalDistribution& obs, const PceQuery& query,
                              const BoundOptions& options = {}) {
  ResponseModel tables(g, options.response_cap);
  BoundsResult result;
  {
    BoundProgram prog = build_full_joint(g, obs, query, tables, options.program);
    result.full.active = prog.active;
    result.full.reduced = prog.reduced;
    result.full.columns = prog.column_count();
    result.full.condition_mass = prog.condition_mass;
    LpSolution sols[2];
    parallel_for(2, [&](std::size_t i) {
      sols[i] = solve_lp(prog, i == 0 ? Sense::Minimize : Sense::Maximize, options.solver);
    });
    result.full.lower = std::move(sols[0]);
    result.full.upper = std::move(sols[1]);
    result.full.lb = result.full.lower.value;
    result.full.ub = result.full.upper.value;
  }
  if (options.mode != BoundMode::FullJoint) {
    BoundProgram prog = build_factored(g, obs, query, tables, confounded_components(g), options.program);
    FactoredBounds fb;
    fb.restarts = options.restarts;
    fb.seed = options.seed;
    fb.lower = solve_factored(prog, Sense::Minimize, options.restarts, options.seed, options.solver);
    fb.upper = solve_factored(prog, Sense::Maximize, options.restarts, options.seed, options.solver);
    fb.lb = fb.lower.value;
    fb.ub = fb.upper.value;
    result.factored = std::move(fb);
  }
  return result;
}

}  // namespace pcbound
