#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pcbound/error.hpp"

namespace pcbound {

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

struct SimplexTolerances {
  double feasibility = 1e-9;
  double optimality = 1e-9;
  double pivot = 1e-11;
  // Largest-coefficient pricing switches to Bland's rule after this many
  // iterations per (rows + columns).
  std::size_t bland_factor = 10;
};

struct SimplexResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  std::size_t iterations = 0;
  std::size_t phase1_iterations = 0;
  std::size_t redundant_rows = 0;
  bool bland = false;
};

// Dense tableau for  min c'x  s.t.  Ax = b, x >= 0  (A row-major, m x n).
class DenseSimplex {
 public:
  DenseSimplex(std::size_t m, std::size_t n, std::vector<double> a, std::vector<double> b, std::vector<double> c,
               SimplexTolerances tol = {})
      : m_(m), n_(n), width_(n + m + 1), tol_(tol), c_(std::move(c)) {
    tableau_.assign((m_ + 1) * width_, 0.0);
    basis_.resize(m_);
    live_.assign(m_, true);
    for (std::size_t i = 0; i < m_; ++i) {
      double sign = b[i] < 0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = sign * a[i * n_ + j];
      at(i, n_ + i) = 1.0;
      rhs(i) = sign * b[i];
      basis_[i] = n_ + i;
    }
    bland_after_ = tol_.bland_factor * (m_ + n_);
    limit_ = 50 * (m_ + n_) + 10000;
  }

  SimplexResult solve() {
    SimplexResult result;
    // Phase 1: minimize the sum of artificials.
    for (std::size_t j = 0; j < n_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += at(i, j);
      cost(j) = -s;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m_; ++i) total += rhs(i);
    cost_rhs() = -total;
    LpStatus s1 = run(result);
    result.phase1_iterations = result.iterations;
    if (s1 != LpStatus::Optimal || -cost_rhs() > tol_.feasibility) {
      result.status = LpStatus::Infeasible;
      return result;
    }

    // Pivot remaining artificials out of the basis; rows where that is
    // impossible are linearly redundant.
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      std::size_t best = n_;
      double best_abs = tol_.pivot;
      for (std::size_t j = 0; j < n_; ++j)
        if (std::abs(at(i, j)) > best_abs) {
          best_abs = std::abs(at(i, j));
          best = j;
        }
      if (best == n_) {
        live_[i] = false;
        ++result.redundant_rows;
      } else {
        pivot(i, best);
      }
    }

    // Phase 2.
    for (std::size_t j = 0; j < width_; ++j) cost(j) = 0.0;
    for (std::size_t j = 0; j < n_; ++j) cost(j) = c_[j];
    for (std::size_t i = 0; i < m_; ++i) {
      if (!live_[i]) continue;
      double cb = c_[basis_[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) cost(j) -= cb * at(i, j);
    }
    result.status = run(result);
    result.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (live_[i] && basis_[i] < n_) result.x[basis_[i]] = std::max(0.0, rhs(i));
    return result;
  }

 private:
  double& at(std::size_t i, std::size_t j) { return tableau_[i * width_ + j]; }
  double& rhs(std::size_t i) { return tableau_[i * width_ + width_ - 1]; }
  double& cost(std::size_t j) { return tableau_[m_ * width_ + j]; }
  double& cost_rhs() { return tableau_[m_ * width_ + width_ - 1]; }

  LpStatus run(SimplexResult& result) {
    std::size_t iterations = 0;
    for (;;) {
      bool bland = iterations >= bland_after_;
      result.bland = result.bland || bland;
      // Pricing: artificials never re-enter.
      std::size_t enter = n_;
      double best = -tol_.optimality;
      for (std::size_t j = 0; j < n_; ++j) {
        double d = cost(j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter == n_) return LpStatus::Optimal;

      std::size_t leave = m_;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (!live_[i]) continue;
        double a = at(i, enter);
        if (a <= tol_.pivot) continue;
        double q = std::max(0.0, rhs(i)) / a;
        // Ties go to the smallest basic variable index.
        if (q < ratio - 1e-15) {
          ratio = q;
          leave = i;
        } else if (q <= ratio + 1e-15 && basis_[i] < basis_[leave]) {
          ratio = std::min(ratio, q);
          leave = i;
        }
      }
      if (leave == m_) return LpStatus::Unbounded;
      pivot(leave, enter);
      ++iterations;
      ++result.iterations;
      if (iterations > limit_)
        throw NumericalError("simplex did not terminate after " + std::to_string(iterations) + " iterations");
    }
  }

  void pivot(std::size_t row, std::size_t col) {
    double p = at(row, col);
    for (std::size_t j = 0; j < width_; ++j) at(row, j) /= p;
    at(row, col) = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == row || (i < m_ && !live_[i])) continue;
      double f = tableau_[i * width_ + col];
      if (f == 0.0) continue;
      double* dst = &tableau_[i * width_];
      const double* src = &tableau_[row * width_];
      for (std::size_t j = 0; j < width_; ++j) dst[j] -= f * src[j];
      dst[col] = 0.0;
    }
    basis_[row] = col;
  }

  std::size_t m_, n_, width_;
  SimplexTolerances tol_;
  std::vector<double> c_;
  std::vector<double> tableau_;
  std::vector<std::size_t> basis_;
  std::vector<bool> live_;
  std::size_t bland_after_ = 0;
  std::size_t limit_ = 0;
};

}  // namespace pcbound
