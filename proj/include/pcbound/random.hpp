#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace pcbound {

// Only the raw mt19937_64 stream is used: the standard distributions are
// implementation defined, and results must match across standard libraries.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Uniform on [0, 1) with 53 random bits.
inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  auto k = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
  return k < n ? k : n - 1;
}

inline std::vector<double> dirichlet_ones(Rng& rng, std::size_t k) {
  std::vector<double> out(k);
  double total = 0.0;
  for (auto& x : out) total += (x = -std::log1p(-unit_uniform(rng)));
  if (!(total > 0.0)) {
    for (auto& x : out) x = 1.0 / static_cast<double>(k);
    return out;
  }
  for (auto& x : out) x /= total;
  return out;
}

// Inverse-CDF draw from a probability vector.
inline std::size_t draw_index(Rng& rng, const std::vector<double>& probabilities) {
  double u = unit_uniform(rng), acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    acc += probabilities[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace pcbound
