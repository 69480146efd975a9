#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pcbound/error.hpp"
#include "pcbound/model.hpp"
#include "pcbound/response.hpp"

namespace pcbound {

inline constexpr std::uint64_t kDefaultProfileCap = std::uint64_t{1} << 22;

// A directed path as its node sequence.
using Path = std::vector<std::size_t>;

struct PathSet {
  std::vector<Path> paths;

  bool empty() const noexcept { return paths.empty(); }
  std::size_t size() const noexcept { return paths.size(); }
  bool contains(const Path& p) const { return std::find(paths.begin(), paths.end(), p) != paths.end(); }
  friend bool operator==(const PathSet&, const PathSet&) = default;
};

// Π: every directed path from the protected attribute to the decision,
// ordered lexicographically by node index sequence.
inline PathSet enumerate_causal_paths(const CausalGraph& g) {
  PathSet out;
  const std::size_t target = g.decision_index();
  Path current{g.protected_index()};
  auto dfs = [&](auto&& self) -> void {
    std::size_t v = current.back();
    if (v == target) {
      out.paths.push_back(current);
      return;
    }
    for (std::size_t c : g.children(v)) {
      current.push_back(c);
      self(self);
      current.pop_back();
    }
  };
  dfs(dfs);
  std::sort(out.paths.begin(), out.paths.end());
  return out;
}

inline std::string path_to_string(const CausalGraph& g, const Path& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "->" : "") + g.name(p[i]);
  return s;
}

// Throws InvalidPathError unless pi is a duplicate-free subset of Π.
inline void check_path_set(const CausalGraph& g, const PathSet& pi) {
  std::set<Path> seen;
  for (const auto& p : pi.paths) {
    if (p.size() < 2 || p.front() != g.protected_index() || p.back() != g.decision_index())
      throw InvalidPathError("path " + (p.empty() ? std::string("<empty>") : path_to_string(g, p)) +
                             " does not run from '" + g.name(g.protected_index()) + "' to '" +
                             g.name(g.decision_index()) + "'");
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
      if (p[i] >= g.size() || p[i + 1] >= g.size() || !g.has_edge(p[i], p[i + 1]))
        throw InvalidPathError("path " + path_to_string(g, p) + " uses a missing edge");
    if (!seen.insert(p).second) throw InvalidPathError("duplicate path " + path_to_string(g, p));
  }
}

inline PathSet complement(const CausalGraph& g, const PathSet& pi) {
  PathSet out;
  for (auto& p : enumerate_causal_paths(g).paths)
    if (!pi.contains(p)) out.paths.push_back(std::move(p));
  return out;
}

struct NodePartition {
  std::vector<std::size_t> witness;    // interior to some path of pi and of its complement
  std::vector<std::size_t> treated;    // only on pi
  std::vector<std::size_t> reference;  // only on the complement
  std::vector<std::size_t> off_path;   // on no causal path from S to the decision
};

inline NodePartition partition_nodes(const CausalGraph& g, const PathSet& pi) {
  check_path_set(g, pi);
  std::vector<bool> on_pi(g.size(), false), on_rest(g.size(), false);
  for (const auto& p : pi.paths)
    for (std::size_t i = 1; i + 1 < p.size(); ++i) on_pi[p[i]] = true;
  for (const auto& p : complement(g, pi).paths)
    for (std::size_t i = 1; i + 1 < p.size(); ++i) on_rest[p[i]] = true;
  NodePartition out;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (v == g.protected_index() || v == g.decision_index()) continue;
    if (on_pi[v] && on_rest[v])
      out.witness.push_back(v);
    else if (on_pi[v])
      out.treated.push_back(v);
    else if (on_rest[v])
      out.reference.push_back(v);
    else
      out.off_path.push_back(v);
  }
  return out;
}

enum class EdgeSide { Active, Reference };

// Edge-level activation: an edge carries the treated value iff it lies on a path of pi.
class EdgeActivation {
 public:
  EdgeActivation(const CausalGraph& g, const PathSet& pi) : n_(g.size()), active_(n_ * n_, false) {
    check_path_set(g, pi);
    for (const auto& p : pi.paths)
      for (std::size_t i = 0; i + 1 < p.size(); ++i) active_[p[i] * n_ + p[i + 1]] = true;
  }
  bool active(std::size_t from, std::size_t to) const { return active_[from * n_ + to]; }

 private:
  std::size_t n_;
  std::vector<bool> active_;
};

inline EdgeSide edge_side(const CausalGraph& g, std::pair<std::size_t, std::size_t> edge, const PathSet& pi) {
  if (!g.has_edge(edge.first, edge.second)) throw InvalidPathError("edge not in graph");
  for (const auto& p : pi.paths)
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
      if (p[i] == edge.first && p[i + 1] == edge.second) return EdgeSide::Active;
  return EdgeSide::Reference;
}

// PCE query: contrast s1 vs s0 along pi, on decision value y_target, within O = o.
struct PceQuery {
  std::size_t s0 = 0;
  std::size_t s1 = 1;
  std::size_t y_target = 0;
  PartialAssignment condition;
  PathSet pi;
};

inline void check_query(const CausalGraph& g, const PceQuery& q) {
  std::size_t s = g.protected_index();
  if (q.s0 >= g.domain_size(s) || q.s1 >= g.domain_size(s))
    throw DomainError("protected values out of range");
  if (q.y_target >= g.domain_size(g.decision_index())) throw DomainError("target decision value out of range");
  for (std::size_t i = 0; i < q.condition.size(); ++i) {
    const auto& [v, x] = q.condition[i];
    if (v >= g.size()) throw NameError("condition variable out of range");
    if (x >= g.domain_size(v)) throw DomainError("condition value out of range for '" + g.name(v) + "'");
    if (i > 0 && q.condition[i - 1].first >= v) throw ConditionError("condition must be sorted and unique");
  }
  check_path_set(g, q.pi);
}

// Values of every variable in the factual world, the reference world do(s0),
// and the treated world where s1 travels along active edges only.
struct WorldValues {
  Assignment factual;
  Assignment reference;
  Assignment treated;
};

namespace detail {

template <typename Pick>
std::size_t parent_config_by(const CausalGraph& g, const ResponseFunctionTable& t, std::size_t v, Pick&& pick) {
  std::size_t idx = 0;
  for (std::size_t p : t.parents()) idx = idx * g.domain_size(p) + pick(p, v);
  return idx;
}

}  // namespace detail

// One step of the three-world recursion for variable v given response r.
inline void evaluate_node(const CausalGraph& g, const ResponseFunctionTable& t, const EdgeActivation& edges,
                          std::size_t s0, std::size_t s1, std::size_t v, std::uint64_t r, WorldValues& w) {
  w.factual[v] = t.value(r, t.parent_config(w.factual));
  if (v == g.protected_index()) {
    w.reference[v] = s0;
    w.treated[v] = s1;
    return;
  }
  w.reference[v] = t.value(r, t.parent_config(w.reference));
  std::size_t cfg = detail::parent_config_by(g, t, v, [&](std::size_t p, std::size_t child) {
    return edges.active(p, child) ? w.treated[p] : w.reference[p];
  });
  w.treated[v] = t.value(r, cfg);
}

inline void evaluate_worlds(const CausalGraph& g, const ResponseModel& tables, const EdgeActivation& edges,
                            std::size_t s0, std::size_t s1, const ResponseProfile& profile, WorldValues& w) {
  w.factual.resize(g.size());
  w.reference.resize(g.size());
  w.treated.resize(g.size());
  for (std::size_t v : g.topological_order()) evaluate_node(g, tables.table(v), edges, s0, s1, v, profile[v], w);
}

inline Assignment factual_eval(const ResponseProfile& profile, const CausalGraph& g, const ResponseModel& tables) {
  Assignment values(g.size(), 0);
  for (std::size_t v : g.topological_order()) {
    const auto& t = tables.table(v);
    values[v] = t.value(profile[v], t.parent_config(values));
  }
  return values;
}

struct DualWorld {
  Assignment treated;    // V¹: witnesses' treated copies, A-side values, the dual decision
  Assignment reference;  // V⁰: witnesses' reference copies, B-side values, do(s0) values
  std::size_t decision = 0;
};

inline DualWorld dual_world_eval(const ResponseProfile& profile, const PceQuery& query, const CausalGraph& g,
                                 const ResponseModel& tables) {
  EdgeActivation edges(g, query.pi);
  WorldValues w;
  evaluate_worlds(g, tables, edges, query.s0, query.s1, profile, w);
  DualWorld out{std::move(w.treated), std::move(w.reference), 0};
  out.decision = out.treated[g.decision_index()];
  return out;
}

using CoefficientVector = std::vector<double>;

inline ProfileSpace full_profile_space(const CausalGraph& g, const ResponseModel& tables,
                                       std::uint64_t cap = kDefaultProfileCap) {
  std::vector<std::size_t> all(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) all[v] = v;
  return ProfileSpace(std::move(all), tables, cap);
}

// Observational row for one full assignment: entry r is ∏_V 𝕀(v_V; pa_V, r_V).
inline CoefficientVector observational_row(const Assignment& values, const CausalGraph& g,
                                           const ResponseModel& tables, std::uint64_t cap = kDefaultProfileCap) {
  ProfileSpace space = full_profile_space(g, tables, cap);
  CoefficientVector row(space.size(), 0.0);
  ResponseProfile r(g.size());
  for (std::uint64_t i = 0; i < space.size(); ++i) {
    space.decode(i, r);
    int product = 1;
    for (std::size_t v = 0; v < g.size() && product; ++v) {
      const auto& t = tables.table(v);
      product *= indicator(values[v], t.parent_config(values), r[v], t);
    }
    row[i] = product;
  }
  return row;
}

// Objective of the bounding program over the full profile space.
inline CoefficientVector pce_objective(const PceQuery& query, const ObservationalDistribution& obs,
                                       const CausalGraph& g, const ResponseModel& tables,
                                       std::uint64_t cap = kDefaultProfileCap) {
  check_query(g, query);
  double p_o = obs.marginal(g, query.condition);
  if (!(p_o > 0.0)) throw ZeroConditionError("P(o) = 0 under the observational distribution");
  ProfileSpace space = full_profile_space(g, tables, cap);
  EdgeActivation edges(g, query.pi);
  const std::size_t y = g.decision_index();
  CoefficientVector out(space.size(), 0.0);
  ResponseProfile r(g.size());
  WorldValues w;
  for (std::uint64_t i = 0; i < space.size(); ++i) {
    space.decode(i, r);
    evaluate_worlds(g, tables, edges, query.s0, query.s1, r, w);
    if (!matches(w.factual, query.condition)) continue;
    int diff = int(w.treated[y] == query.y_target) - int(w.reference[y] == query.y_target);
    out[i] = diff / p_o;
  }
  return out;
}

}  // namespace pcbound
