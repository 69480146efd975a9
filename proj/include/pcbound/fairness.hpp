#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcbound/effects.hpp"
#include "pcbound/error.hpp"
#include "pcbound/model.hpp"
#include "pcbound/solver.hpp"

namespace pcbound {

enum class NotionKind {
  TotalEffect,
  SystemDirect,
  SystemIndirect,
  IndividualDirect,
  GroupDirect,
  CounterfactualFairness,
  CounterfactualErrorRate,
  IndividualIndirect,
};

inline constexpr NotionKind kAllNotions[] = {
    NotionKind::TotalEffect,           NotionKind::SystemDirect,           NotionKind::SystemIndirect,
    NotionKind::IndividualDirect,      NotionKind::GroupDirect,            NotionKind::CounterfactualFairness,
    NotionKind::CounterfactualErrorRate, NotionKind::IndividualIndirect,
};

inline const char* to_string(NotionKind k) {
  switch (k) {
    case NotionKind::TotalEffect: return "total-effect";
    case NotionKind::SystemDirect: return "direct";
    case NotionKind::SystemIndirect: return "indirect";
    case NotionKind::IndividualDirect: return "individual-direct";
    case NotionKind::GroupDirect: return "group-direct";
    case NotionKind::CounterfactualFairness: return "counterfactual";
    case NotionKind::CounterfactualErrorRate: return "counterfactual-error-rate";
    case NotionKind::IndividualIndirect: return "individual-indirect";
  }
  return "total-effect";
}

inline NotionKind parse_notion(std::string_view name) {
  for (NotionKind k : kAllNotions)
    if (name == to_string(k)) return k;
  throw NameError("unknown notion '" + std::string(name) + "'");
}

enum class ErrorRatePaths { Unset, Direct, Indirect };

struct NotionSpec {
  NotionKind kind = NotionKind::TotalEffect;
  std::vector<std::string> redlining;
  // Values of the conditioned variables: the individual profile, the group
  // assignment, or the true outcome. A protected value here overrides s0.
  PartialAssignment individual;
  // Selects O = ∅ instead of O = {S = s0} for the direct and indirect notions.
  bool unconditioned = false;
  ErrorRatePaths error_rate_paths = ErrorRatePaths::Unset;
};

// π_d = {S -> decision}.
inline PathSet direct_paths(const CausalGraph& g) {
  std::size_t s = g.protected_index(), y = g.decision_index();
  if (!g.has_edge(s, y))
    throw MissingEdgeError("no direct edge " + g.name(s) + " -> " + g.name(y));
  return PathSet{{Path{s, y}}};
}

// π_i: paths of Π whose interior meets one of the attributes.
inline PathSet redlining_paths(const CausalGraph& g, const std::vector<std::string>& attrs) {
  std::vector<bool> marked(g.size(), false);
  for (const auto& name : attrs) {
    std::size_t v = g.index_of(name);
    if (v == g.protected_index() || v == g.decision_index())
      throw RoleError("'" + name + "' cannot be a redlining attribute");
    marked[v] = true;
  }
  PathSet out;
  for (auto& p : enumerate_causal_paths(g).paths)
    if (std::any_of(p.begin() + 1, p.end() - 1, [&](std::size_t v) { return marked[v]; }))
      out.paths.push_back(std::move(p));
  return out;
}

// The individual profile: every variable except the decision and the true outcome.
inline std::vector<std::size_t> profile_variables(const CausalGraph& g) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (v != g.decision_index() && v != g.outcome_index()) out.push_back(v);
  return out;
}

// Variables of O for a notion, ascending.
inline std::vector<std::size_t> condition_variables(const NotionSpec& notion, const CausalGraph& g) {
  const std::size_t s = g.protected_index();
  std::vector<std::size_t> out;
  switch (notion.kind) {
    case NotionKind::TotalEffect: break;
    case NotionKind::SystemDirect:
    case NotionKind::SystemIndirect:
      if (!notion.unconditioned) out.push_back(s);
      break;
    case NotionKind::IndividualDirect:
    case NotionKind::CounterfactualFairness:
    case NotionKind::IndividualIndirect: out = profile_variables(g); break;
    case NotionKind::GroupDirect:
      for (std::size_t p : g.parents(g.decision_index()))
        if (p != s) out.push_back(p);
      break;
    case NotionKind::CounterfactualErrorRate:
      if (!g.outcome_index()) throw RoleError("the counterfactual error rate needs a declared outcome variable");
      out = {s, *g.outcome_index()};
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline PathSet notion_paths(const NotionSpec& notion, const CausalGraph& g) {
  auto indirect = [&] {
    if (notion.redlining.empty())
      throw EmptyRedliningError(std::string("notion '") + to_string(notion.kind) + "' needs redlining attributes");
    return redlining_paths(g, notion.redlining);
  };
  switch (notion.kind) {
    case NotionKind::TotalEffect:
    case NotionKind::CounterfactualFairness: return enumerate_causal_paths(g);
    case NotionKind::SystemDirect:
    case NotionKind::IndividualDirect:
    case NotionKind::GroupDirect: return direct_paths(g);
    case NotionKind::SystemIndirect:
    case NotionKind::IndividualIndirect: return indirect();
    case NotionKind::CounterfactualErrorRate:
      if (notion.error_rate_paths == ErrorRatePaths::Direct) return direct_paths(g);
      if (notion.error_rate_paths == ErrorRatePaths::Indirect) return indirect();
      throw ConditionError("the counterfactual error rate needs an explicit direct or indirect path choice");
  }
  return {};
}

inline PceQuery notion_to_query(const NotionSpec& notion, const CausalGraph& g, std::size_t s0, std::size_t s1,
                                std::size_t y_target) {
  PceQuery q;
  q.s0 = s0;
  q.s1 = s1;
  q.y_target = y_target;
  q.pi = notion_paths(notion, g);
  const auto vars = condition_variables(notion, g);
  for (const auto& [v, _] : notion.individual)
    if (!std::binary_search(vars.begin(), vars.end(), v))
      throw ConditionError("'" + g.name(v) + "' is not conditioned on by notion '" + to_string(notion.kind) + "'");
  for (std::size_t v : vars) {
    auto it = std::find_if(notion.individual.begin(), notion.individual.end(),
                           [&](const auto& kv) { return kv.first == v; });
    if (it != notion.individual.end())
      q.condition.emplace_back(v, it->second);
    else if (v == g.protected_index())
      q.condition.emplace_back(v, s0);
    else
      throw ConditionError("notion '" + std::string(to_string(notion.kind)) + "' needs a value for '" + g.name(v) +
                           "'");
  }
  check_query(g, q);
  return q;
}

enum class VerdictKind { Fair, Unfair, Uncertain };

inline const char* to_string(VerdictKind v) {
  switch (v) {
    case VerdictKind::Fair: return "fair";
    case VerdictKind::Unfair: return "unfair";
    case VerdictKind::Uncertain: return "uncertain";
  }
  return "uncertain";
}

struct Verdict {
  VerdictKind kind = VerdictKind::Uncertain;
  double tau = 0.0;
  double lb = 0.0;
  double ub = 0.0;
};

// Fair iff [lb, ub] ⊆ [-τ, τ]; Unfair iff the interval misses [-τ, τ].
inline Verdict verdict(double lb, double ub, double tau) {
  if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
  Verdict out{VerdictKind::Uncertain, tau, lb, ub};
  if (ub <= tau && lb >= -tau)
    out.kind = VerdictKind::Fair;
  else if (lb > tau || ub < -tau)
    out.kind = VerdictKind::Unfair;
  return out;
}

// Uses the full-joint interval only.
inline Verdict verdict(const BoundsResult& bounds, double tau) { return verdict(bounds.full.lb, bounds.full.ub, tau); }

}  // namespace pcbound
