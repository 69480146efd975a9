#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
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

struct GroundTruth {
  PceQuery query;
  double value = 0.0;
  double p_treated = 0.0;    // P(ŷ in the path-specific world | o)
  double p_reference = 0.0;  // P(ŷ under do(s0) | o)
  double p_condition = 0.0;  // P(o)
};

// Exact PCE by enumerating every joint exogenous value. Deliberately shares no
// evaluation code with the response-function machinery.
inline GroundTruth ground_truth_pce(const OracleScm& scm, const PceQuery& query) {
  const CausalGraph& g = scm.graph();
  check_query(g, query);
  const std::size_t n = g.size(), s = g.protected_index(), y = g.decision_index();
  std::vector<bool> active(n * n, false);
  for (const auto& p : query.pi.paths)
    for (std::size_t i = 0; i + 1 < p.size(); ++i) active[p[i] * n + p[i + 1]] = true;

  double p_o = 0.0, treated_hits = 0.0, reference_hits = 0.0;
  Assignment reference(n);
  std::vector<std::optional<std::size_t>> treated(n);
  for_each_block_value(scm, [&](std::span<const std::size_t> u, double w) {
    if (w == 0.0) return;
    Assignment factual = scm.evaluate(u);
    if (!matches(factual, query.condition)) return;
    p_o += w;
    for (std::size_t v : g.topological_order())
      reference[v] = v == s ? query.s0 : scm.apply(v, scm.parent_config(v, reference), u[scm.wiring()[v]]);
    std::fill(treated.begin(), treated.end(), std::nullopt);
    auto treated_value = [&](auto&& self, std::size_t v) -> std::size_t {
      if (treated[v]) return *treated[v];
      std::size_t out;
      if (v == s) {
        out = query.s1;
      } else {
        Assignment in = reference;
        for (std::size_t p : g.parents(v))
          if (active[p * n + v]) in[p] = self(self, p);
        out = scm.apply(v, scm.parent_config(v, in), u[scm.wiring()[v]]);
      }
      treated[v] = out;
      return out;
    };
    if (treated_value(treated_value, y) == query.y_target) treated_hits += w;
    if (reference[y] == query.y_target) reference_hits += w;
  });
  if (!(p_o > 0.0)) throw ZeroConditionError("P(o) = 0 under the model");
  GroundTruth out;
  out.query = query;
  out.p_condition = p_o;
  out.p_treated = treated_hits / p_o;
  out.p_reference = reference_hits / p_o;
  out.value = out.p_treated - out.p_reference;
  return out;
}

struct GeneratorSpec {
  std::string topology = "fig6";  // bow | kite | w | fig6 | fig6-markovian | custom
  std::size_t confounder_size = 100;
  // Domain size of blocks that feed a single variable.
  std::size_t exogenous_size = 8;
  std::uint64_t seed = 0;
  std::optional<GraphDecl> graph;  // custom topology only
};

namespace detail {

inline VariableSpec binary(std::string name, std::string lo, std::string hi) {
  return VariableSpec{std::move(name), {std::move(lo), std::move(hi)}};
}

}  // namespace detail

inline GraphDecl topology_graph(const std::string& name) {
  GraphDecl d;
  if (name == "bow") {
    d.variables = {detail::binary("X", "x0", "x1"), detail::binary("Y", "y0", "y1")};
    d.directed_edges = {{"X", "Y"}};
    d.bidirected_edges = {{"X", "Y"}};
    d.protected_attr = "X";
    d.decision = "Y";
  } else if (name == "kite") {
    d.variables = {detail::binary("X", "x0", "x1"), detail::binary("W", "w0", "w1"),
                   detail::binary("Z", "z0", "z1"), detail::binary("Y", "y0", "y1")};
    d.directed_edges = {{"X", "W"}, {"W", "Z"}, {"Z", "Y"}, {"W", "Y"}};
    d.protected_attr = "X";
    d.decision = "Y";
  } else if (name == "w") {
    d.variables = {detail::binary("X", "x0", "x1"), detail::binary("Y", "y0", "y1")};
    d.directed_edges = {{"X", "Y"}};
    d.protected_attr = "X";
    d.decision = "Y";
  } else if (name == "fig6" || name == "fig6-markovian") {
    d.variables = {detail::binary("S", "s-", "s+"), detail::binary("W", "w0", "w1"),
                   detail::binary("A", "a0", "a1"), detail::binary("B", "b0", "b1"),
                   detail::binary("Yhat", "y+", "y-")};
    d.directed_edges = {{"S", "Yhat"}, {"S", "W"}, {"W", "A"}, {"A", "Yhat"}, {"W", "B"}, {"B", "Yhat"}};
    d.protected_attr = "S";
    d.decision = "Yhat";
    if (name == "fig6")
      for (std::size_t a = 0; a < d.variables.size(); ++a)
        for (std::size_t b = a + 1; b < d.variables.size(); ++b)
          d.bidirected_edges.emplace_back(d.variables[a].name, d.variables[b].name);
  } else {
    throw NameError("unknown topology '" + name + "'");
  }
  return d;
}

// Random SCM: one exogenous block per confounded component (which must be a
// clique), Dirichlet(1) block distributions, uniform truth tables.
inline OracleScm generate_model(const GeneratorSpec& spec) {
  GraphDecl decl;
  if (spec.topology == "custom") {
    if (!spec.graph) throw NameError("custom topology needs a graph");
    decl = *spec.graph;
  } else {
    decl = topology_graph(spec.topology);
  }
  CausalGraph g(std::move(decl));
  if (spec.confounder_size == 0 || spec.exogenous_size == 0) throw DomainError("block sizes must be positive");
  auto comps = confounded_components(g);
  std::vector<ExogenousBlock> blocks;
  std::vector<std::size_t> wiring(g.size());
  Rng rng = make_rng(spec.seed, 0);
  for (std::size_t c = 0; c < comps.components.size(); ++c) {
    const auto& members = comps.components[c];
    for (std::size_t a : members)
      for (std::size_t b : members)
        if (a < b && !g.confounded(a, b))
          throw ConfoundingError("confounded component containing '" + g.name(a) + "' and '" + g.name(b) +
                                 "' is not a clique, so no single block realizes it");
    ExogenousBlock block;
    block.id = "U";
    for (std::size_t v : members) block.id += "_" + g.name(v);
    std::size_t size = members.size() >= 2 ? spec.confounder_size : spec.exogenous_size;
    block.probabilities = dirichlet_ones(rng, size);
    for (std::size_t v : members) wiring[v] = c;
    blocks.push_back(std::move(block));
  }
  std::vector<std::vector<std::size_t>> functions(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    std::size_t configs = 1;
    for (std::size_t p : g.parents(v)) configs *= g.domain_size(p);
    functions[v].resize(configs * blocks[wiring[v]].size());
    for (auto& x : functions[v]) x = uniform_index(rng, g.domain_size(v));
  }
  return OracleScm(std::move(g), std::move(blocks), std::move(wiring), std::move(functions));
}

inline constexpr std::size_t kSampleChunk = 4096;

// n i.i.d. records. Each chunk of records has its own seeded stream, so the
// output does not depend on the number of worker threads.
inline std::vector<Assignment> sample_dataset(const OracleScm& scm, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw EmptyDataError("sample size must be at least 1");
  std::vector<Assignment> out(n);
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    std::vector<std::size_t> u(scm.blocks().size());
    for (std::size_t i = c * kSampleChunk; i < std::min(n, (c + 1) * kSampleChunk); ++i) {
      for (std::size_t b = 0; b < u.size(); ++b) u[b] = draw_index(rng, scm.blocks()[b].probabilities);
      out[i] = scm.evaluate(u);
    }
  });
  return out;
}

struct BruteForceResult {
  LpStatus status = LpStatus::Infeasible;
  double value = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::size_t kBruteForceColumns = 12;
inline constexpr std::size_t kBruteForceRows = 8;

// Optimum over all basic feasible solutions, found by solving every square
// subsystem. Assumes a bounded feasible set.
inline BruteForceResult brute_force_lp(std::size_t n, const std::vector<SparseRow>& rows, const std::vector<double>& c,
                                       Sense sense) {
  const std::size_t m = rows.size();
  if (n > kBruteForceColumns || m > kBruteForceRows)
    throw SizeError("brute force needs at most 12 columns and 8 rows, got " + std::to_string(n) + " and " +
                    std::to_string(m));
  std::vector<double> a(m * n, 0.0), b(m);
  for (std::size_t i = 0; i < m; ++i) {
    b[i] = rows[i].rhs;
    for (std::size_t k = 0; k < rows[i].index.size(); ++k) a[i * n + rows[i].index[k]] += rows[i].value[k];
  }
  constexpr double eps = 1e-10;
  BruteForceResult out;
  std::vector<std::size_t> cols;
  std::vector<double> x(n);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const std::size_t k = static_cast<std::size_t>(std::popcount(mask));
    if (k > m) continue;
    cols.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    // Gauss-Jordan on [A_B | b] with partial pivoting.
    std::vector<double> t(m * (k + 1));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t q = 0; q < k; ++q) t[i * (k + 1) + q] = a[i * n + cols[q]];
      t[i * (k + 1) + k] = b[i];
    }
    bool independent = true;
    for (std::size_t q = 0; q < k; ++q) {
      std::size_t piv = q;
      for (std::size_t i = q + 1; i < m; ++i)
        if (std::abs(t[i * (k + 1) + q]) > std::abs(t[piv * (k + 1) + q])) piv = i;
      if (std::abs(t[piv * (k + 1) + q]) < eps) {
        independent = false;
        break;
      }
      for (std::size_t j = 0; j <= k; ++j) std::swap(t[q * (k + 1) + j], t[piv * (k + 1) + j]);
      double d = t[q * (k + 1) + q];
      for (std::size_t j = 0; j <= k; ++j) t[q * (k + 1) + j] /= d;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == q) continue;
        double f = t[i * (k + 1) + q];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j <= k; ++j) t[i * (k + 1) + j] -= f * t[q * (k + 1) + j];
      }
    }
    if (!independent) continue;
    std::fill(x.begin(), x.end(), 0.0);
    bool nonnegative = true;
    for (std::size_t q = 0; q < k; ++q) {
      double v = t[q * (k + 1) + k];
      if (v < -1e-9) nonnegative = false;
      x[cols[q]] = std::max(0.0, v);
    }
    if (!nonnegative) continue;
    double residual = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * x[j];
      residual = std::max(residual, std::abs(s - b[i]));
    }
    if (residual > 1e-9) continue;
    double value = 0.0;
    for (std::size_t j = 0; j < n; ++j) value += c[j] * x[j];
    bool better = out.status != LpStatus::Optimal || (sense == Sense::Maximize ? value > out.value : value < out.value);
    if (better) {
      out.status = LpStatus::Optimal;
      out.value = value;
    }
  }
  return out;
}

inline BruteForceResult brute_force_lp(const BoundProgram& prog, Sense sense) {
  if (prog.mode != ProgramMode::FullJoint) throw Error("brute force needs a full-joint program");
  return brute_force_lp(prog.column_count(), prog.rows, prog.objective, sense);
}

// True response distribution of an oracle SCM over the full profile space:
// each exogenous value is classified into the profile its truth tables realize.
inline std::vector<double> induced_response_distribution(const OracleScm& scm, const ResponseModel& tables,
                                                         std::uint64_t cap = kDefaultProfileCap) {
  const CausalGraph& g = scm.graph();
  ProfileSpace space = full_profile_space(g, tables, cap);
  std::vector<double> out(space.size(), 0.0);
  ResponseProfile r(g.size());
  std::vector<std::size_t> values;
  for_each_block_value(scm, [&](std::span<const std::size_t> u, double w) {
    for (std::size_t v = 0; v < g.size(); ++v) {
      const auto& t = tables.table(v);
      values.resize(t.parent_config_count());
      for (std::size_t cfg = 0; cfg < values.size(); ++cfg) values[cfg] = scm.apply(v, cfg, u[scm.wiring()[v]]);
      r[v] = t.classify(values);
    }
    out[space.encode(r)] += w;
  });
  return out;
}

}  // namespace pcbound
