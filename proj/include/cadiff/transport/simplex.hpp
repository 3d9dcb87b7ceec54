#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "cadiff/numerics/tensor.hpp"

namespace cadiff::lp {

struct Solution {
  std::vector<double> x;     // primal values
  std::vector<double> dual;  // one multiplier per equality row
  double objective = 0.0;
  std::size_t pivots = 0;
};

/// Dense two-phase tableau simplex for  min c'x  s.t.  A x = b, x >= 0.
/// Rows of A must be linearly independent and b >= 0. Bland's rule prevents
/// cycling on the highly degenerate transportation polytopes it is used for.
class Simplex {
 public:
  Simplex(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), A_(rows * cols, 0.0), b_(rows, 0.0), c_(cols, 0.0) {}

  double& a(std::size_t r, std::size_t c) { return A_[r * n_ + c]; }
  double& b(std::size_t r) { return b_[r]; }
  double& c(std::size_t j) { return c_[j]; }

  Solution solve(double tol = 1e-12) {
    for (double v : b_)
      if (v < -tol) throw Error("simplex: negative right-hand side");
    // Tableau columns: n_ structural, m_ artificial, rhs.
    W_ = n_ + m_ + 1;
    T_.assign((m_ + 1) * W_, 0.0);
    basis_.assign(m_, 0);
    for (std::size_t r = 0; r < m_; ++r) {
      for (std::size_t j = 0; j < n_; ++j) t(r, j) = A_[r * n_ + j];
      t(r, n_ + r) = 1.0;
      t(r, W_ - 1) = std::max(b_[r], 0.0);
      basis_[r] = n_ + r;
    }
    Solution sol;
    // Phase 1: minimise the sum of artificials.
    set_objective([&](std::size_t j) { return j >= n_ ? 1.0 : 0.0; });
    sol.pivots += iterate(n_ + m_, tol);
    if (-t(m_, W_ - 1) > 1e-9) throw Error("simplex: infeasible constraints");
    // Drive remaining zero-level artificials out of the basis.
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      for (std::size_t j = 0; j < n_; ++j)
        if (std::abs(t(r, j)) > tol) {
          pivot(r, j);
          ++sol.pivots;
          break;
        }
    }
    // Phase 2: artificials may no longer enter.
    set_objective([&](std::size_t j) { return j < n_ ? c_[j] : 0.0; });
    sol.pivots += iterate(n_, tol);

    sol.x.assign(n_, 0.0);
    for (std::size_t r = 0; r < m_; ++r)
      if (basis_[r] < n_) sol.x[basis_[r]] = t(r, W_ - 1);
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += c_[j] * sol.x[j];
    // Reduced cost of artificial r is 0 - y_r.
    sol.dual.assign(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) sol.dual[r] = -t(m_, n_ + r);
    return sol;
  }

 private:
  double& t(std::size_t r, std::size_t c) { return T_[r * W_ + c]; }

  template <typename Cost>
  void set_objective(Cost cost) {
    for (std::size_t j = 0; j + 1 < W_; ++j) t(m_, j) = cost(j);
    t(m_, W_ - 1) = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      const double cb = cost(basis_[r]);
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < W_; ++j) t(m_, j) -= cb * t(r, j);
    }
  }

  std::size_t iterate(std::size_t enterable, double tol) {
    std::size_t pivots = 0;
    const std::size_t limit = 50 * (m_ + n_) + 1000;
    for (;;) {
      std::size_t enter = enterable;
      for (std::size_t j = 0; j < enterable; ++j)
        if (t(m_, j) < -tol) {
          enter = j;
          break;
        }
      if (enter == enterable) return pivots;
      std::size_t leave = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        const double coef = t(r, enter);
        if (coef <= tol) continue;
        const double ratio = t(r, W_ - 1) / coef;
        if (ratio < best - tol || (ratio <= best + tol && leave < m_ && basis_[r] < basis_[leave])) {
          if (ratio < best) best = ratio;
          leave = r;
        }
      }
      if (leave == m_) throw Error("simplex: unbounded objective");
      pivot(leave, enter);
      if (++pivots > limit) throw Error("simplex: pivot limit exceeded");
    }
  }

  void pivot(std::size_t row, std::size_t col) {
    const double inv = 1.0 / t(row, col);
    for (std::size_t j = 0; j < W_; ++j) t(row, j) *= inv;
    t(row, col) = 1.0;
    for (std::size_t r = 0; r <= m_; ++r) {
      if (r == row) continue;
      const double f = t(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < W_; ++j) t(r, j) -= f * t(row, j);
      t(r, col) = 0.0;
    }
    basis_[row] = col;
  }

  std::size_t m_, n_, W_ = 0;
  std::vector<double> A_, b_, c_, T_;
  std::vector<std::size_t> basis_;
};

}  // namespace cadiff::lp
