#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcbound/error.hpp"
#include "pcbound/model.hpp"

namespace pcbound {

inline constexpr std::uint64_t kDefaultResponseCap = std::uint64_t{1} << 20;

// One response index r_V per variable, declaration order.
using ResponseProfile = std::vector<std::uint64_t>;

namespace detail {

// base^exponent, or nullopt on overflow past `limit`.
inline std::optional<std::uint64_t> checked_pow(std::uint64_t base, std::uint64_t exponent,
                                                std::uint64_t limit) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exponent; ++i) {
    if (out > limit / base) return std::nullopt;
    out *= base;
  }
  return out;
}

inline std::uint64_t parent_config_count(const CausalGraph& g, std::size_t v) {
  std::uint64_t configs = 1;
  for (std::size_t p : g.parents(v)) {
    if (configs > std::numeric_limits<std::uint64_t>::max() / g.domain_size(p))
      throw CapExceededError("parent configurations of '" + g.name(v) + "' overflow");
    configs *= g.domain_size(p);
  }
  return configs;
}

}  // namespace detail

// N_V = |dom V| ^ (number of joint parent assignments).
inline std::uint64_t response_count(const CausalGraph& g, std::size_t v) {
  if (v >= g.size()) throw NameError("variable index out of range");
  std::uint64_t configs = detail::parent_config_count(g, v);
  auto n = detail::checked_pow(g.domain_size(v), configs, std::numeric_limits<std::uint64_t>::max());
  if (!n)
    throw CapExceededError("response count of '" + g.name(v) + "' (in-degree " +
                           std::to_string(g.parents(v).size()) + ") exceeds 64 bits");
  return *n;
}

inline std::uint64_t response_count(const CausalGraph& g, std::string_view name) {
  return response_count(g, g.index_of(name));
}

// Canonical enumeration of the deterministic maps parents -> V.
//
// Parent assignments are ordered lexicographically (first parent most
// significant). A function is read as a base-|dom V| numeral whose most
// significant digit is its value on the first parent assignment; r is that
// numeral. For binary X -> Y this gives: 0 constant y0, 1 identity,
// 2 inverter, 3 constant y1.
class ResponseFunctionTable {
 public:
  ResponseFunctionTable(const CausalGraph& g, std::size_t v, std::uint64_t cap = kDefaultResponseCap)
      : variable_(v), name_(g.name(v)), domain_(g.domain_size(v)) {
    auto pa = g.parents(v);
    parents_.assign(pa.begin(), pa.end());
    configs_ = detail::parent_config_count(g, v);
    auto n = detail::checked_pow(domain_, configs_, cap);
    if (!n)
      throw CapExceededError("variable '" + name_ + "' (in-degree " + std::to_string(parents_.size()) +
                             ") needs more than " + std::to_string(cap) + " response functions");
    count_ = *n;
    parent_place_.assign(parents_.size(), 1);
    std::size_t place = 1;
    for (std::size_t k = parents_.size(); k-- > 0;) {
      parent_place_[k] = place;
      place *= g.domain_size(parents_[k]);
    }
    digit_place_.assign(configs_, 1);
    std::uint64_t dp = 1;
    for (std::size_t k = configs_; k-- > 0;) {
      digit_place_[k] = dp;
      if (k > 0) dp *= domain_;
    }
  }

  std::size_t variable() const noexcept { return variable_; }
  const std::string& name() const noexcept { return name_; }
  std::span<const std::size_t> parents() const noexcept { return parents_; }
  std::size_t domain_size() const noexcept { return domain_; }
  std::uint64_t count() const noexcept { return count_; }
  std::size_t parent_config_count() const noexcept { return configs_; }

  // Index of the parent assignment read from a full assignment.
  std::size_t parent_config(const Assignment& values) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < parents_.size(); ++k) idx += values[parents_[k]] * parent_place_[k];
    return idx;
  }

  // g_V(pa, r).
  std::size_t value(std::uint64_t r, std::size_t config) const {
    return static_cast<std::size_t>((r / digit_place_[config]) % domain_);
  }

  std::vector<std::size_t> function(std::uint64_t r) const {
    std::vector<std::size_t> out(configs_);
    for (std::size_t k = 0; k < configs_; ++k) out[k] = value(r, k);
    return out;
  }

  // Inverse of function(): the response index of a total map given as values per parent assignment.
  std::uint64_t classify(std::span<const std::size_t> values) const {
    std::uint64_t r = 0;
    for (std::size_t k = 0; k < configs_; ++k) r += values[k] * digit_place_[k];
    return r;
  }

 private:
  std::size_t variable_;
  std::string name_;
  std::size_t domain_;
  std::vector<std::size_t> parents_;
  std::vector<std::size_t> parent_place_;
  std::size_t configs_ = 1;
  std::uint64_t count_ = 0;
  std::vector<std::uint64_t> digit_place_;
};

inline ResponseFunctionTable enumerate_response_functions(const CausalGraph& g, std::string_view name,
                                                          std::uint64_t cap = kDefaultResponseCap) {
  return ResponseFunctionTable(g, g.index_of(name), cap);
}

// 𝕀(v; pa_V, r_V).
inline int indicator(std::size_t value, std::size_t parent_config, std::uint64_t r,
                     const ResponseFunctionTable& table) {
  return table.value(r, parent_config) == value ? 1 : 0;
}

// Partition of the variables into connected components of the bidirected graph,
// each sorted, ordered by smallest member.
struct FactorizationBlocks {
  std::vector<std::vector<std::size_t>> components;

  std::size_t component_of(std::size_t v) const {
    for (std::size_t c = 0; c < components.size(); ++c)
      for (std::size_t w : components[c])
        if (w == v) return c;
    throw NameError("variable not in any component");
  }
};

inline FactorizationBlocks confounded_components(const CausalGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> comp(n, n);
  FactorizationBlocks out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != n) continue;
    std::vector<std::size_t> members, stack{s};
    comp[s] = out.components.size();
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      members.push_back(v);
      for (std::size_t w = 0; w < n; ++w)
        if (comp[w] == n && g.confounded(v, w)) {
          comp[w] = comp[s];
          stack.push_back(w);
        }
    }
    std::sort(members.begin(), members.end());
    out.components.push_back(std::move(members));
  }
  return out;
}

// Response tables for every variable of a graph.
class ResponseModel {
 public:
  explicit ResponseModel(const CausalGraph& g, std::uint64_t cap = kDefaultResponseCap) {
    tables_.reserve(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) tables_.emplace_back(g, v, cap);
  }

  const ResponseFunctionTable& table(std::size_t v) const { return tables_.at(v); }
  std::size_t size() const noexcept { return tables_.size(); }

 private:
  std::vector<ResponseFunctionTable> tables_;
};

// Mixed-radix index space over the response variables of a subset of
// variables (first listed variable most significant).
class ProfileSpace {
 public:
  ProfileSpace() = default;
  ProfileSpace(std::vector<std::size_t> variables, const ResponseModel& tables, std::uint64_t cap)
      : variables_(std::move(variables)) {
    radix_.resize(variables_.size());
    place_.assign(variables_.size(), 1);
    size_ = 1;
    for (std::size_t k = variables_.size(); k-- > 0;) {
      radix_[k] = tables.table(variables_[k]).count();
      place_[k] = size_;
      if (size_ > cap / radix_[k])
        throw CapExceededError("response profile space exceeds the cap of " + std::to_string(cap));
      size_ *= radix_[k];
    }
  }

  const std::vector<std::size_t>& variables() const noexcept { return variables_; }
  const std::vector<std::uint64_t>& radices() const noexcept { return radix_; }
  std::uint64_t size() const noexcept { return size_; }

  // Writes the response indices of `index` into a full-length profile.
  void decode(std::uint64_t index, ResponseProfile& profile) const {
    for (std::size_t k = 0; k < variables_.size(); ++k)
      profile[variables_[k]] = (index / place_[k]) % radix_[k];
  }
  std::uint64_t encode(const ResponseProfile& profile) const {
    std::uint64_t idx = 0;
    for (std::size_t k = 0; k < variables_.size(); ++k) idx += profile[variables_[k]] * place_[k];
    return idx;
  }

 private:
  std::vector<std::size_t> variables_;
  std::vector<std::uint64_t> radix_;
  std::vector<std::uint64_t> place_;
  std::uint64_t size_ = 1;
};

}  // namespace pcbound
