#pragma once

// Small non-negative quadratic program solver for the dual of the gradient
// projection step: minimize 1/2 v'Hv + b'v subject to v >= 0, with H PSD
// and tiny (one row per stored task). Projected coordinate descent with a
// fallback to exact active-set enumeration when the descent stalls (which
// happens when constraints are linearly dependent and H is singular).

#include <cmath>
#include <cstddef>
#include <vector>

#include "regcl/errors.hpp"

namespace regcl {

struct NonNegQpOptions {
  double tolerance = 1e-9;  // max allowed KKT violation
  int max_sweeps = 10000;
};

namespace detail {

// max over k of the KKT residual: -(b + Hv)_k must be <= 0, and the
// gradient must vanish on coordinates with v_k > 0
inline double kkt_violation(const std::vector<std::vector<double>>& H,
                            const std::vector<double>& b, const std::vector<double>& v) {
  const std::size_t m = b.size();
  double worst = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double g = b[k];
    for (std::size_t j = 0; j < m; ++j) g += H[k][j] * v[j];
    worst = std::max(worst, -g);
    if (v[k] > 0.0) worst = std::max(worst, std::abs(g));
  }
  return worst;
}

// Gaussian elimination with partial pivoting; returns false if singular.
inline bool solve_linear(std::vector<std::vector<double>> A, std::vector<double> rhs,
                         std::vector<double>& out) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (std::abs(A[piv][col]) < 1e-12) return false;
    std::swap(A[piv], A[col]);
    std::swap(rhs[piv], rhs[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= A[r][c] * out[c];
    out[r] = s / A[r][r];
  }
  return true;
}

// Exact solve by enumerating active sets (feasible only for small m).
// For each candidate active set A, solves H[A][A] x = -b[A] and keeps the
// feasible solution with the smallest KKT residual.
inline bool active_set_enumeration(const std::vector<std::vector<double>>& H,
                                   const std::vector<double>& b, std::vector<double>& best,
                                   double& best_viol) {
  const std::size_t m = b.size();
  bool improved = false;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<std::size_t> active;
    bool skip = false;
    for (std::size_t k = 0; k < m; ++k)
      if (mask & (1u << k)) {
        if (H[k][k] <= 0.0) {
          skip = true;  // zero constraint row can never be active
          break;
        }
        active.push_back(k);
      }
    if (skip) continue;

    std::vector<double> v(m, 0.0);
    if (!active.empty()) {
      const std::size_t n = active.size();
      std::vector<std::vector<double>> sub(n, std::vector<double>(n));
      std::vector<double> rhs(n), x;
      for (std::size_t i = 0; i < n; ++i) {
        rhs[i] = -b[active[i]];
        for (std::size_t j = 0; j < n; ++j) sub[i][j] = H[active[i]][active[j]];
      }
      if (!solve_linear(std::move(sub), std::move(rhs), x)) continue;
      bool nonneg = true;
      for (double xi : x)
        if (xi < -1e-12) nonneg = false;
      if (!nonneg) continue;
      for (std::size_t i = 0; i < n; ++i) v[active[i]] = std::max(0.0, x[i]);
    }

    const double viol = kkt_violation(H, b, v);
    if (viol < best_viol) {
      best_viol = viol;
      best = std::move(v);
      improved = true;
    }
  }
  return improved;
}

}  // namespace detail

// Returns v >= 0 minimizing 1/2 v'Hv + b'v. H is row-major m x m.
inline std::vector<double> solve_nonneg_qp(const std::vector<std::vector<double>>& H,
                                           const std::vector<double>& b,
                                           const NonNegQpOptions& opts = {}) {
  const std::size_t m = b.size();
  if (H.size() != m) throw ShapeError("solve_nonneg_qp: H/b size mismatch");
  for (const auto& row : H)
    if (row.size() != m) throw ShapeError("solve_nonneg_qp: H is not square");

  std::vector<double> v(m, 0.0);
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (std::size_t k = 0; k < m; ++k) {
      if (H[k][k] <= 0.0) {
        v[k] = 0.0;  // degenerate row: constraint gradient is zero
        continue;
      }
      double r = b[k];
      for (std::size_t j = 0; j < m; ++j) r += H[k][j] * v[j];
      v[k] = std::max(0.0, v[k] - r / H[k][k]);
    }
    if (detail::kkt_violation(H, b, v) < opts.tolerance) return v;
  }

  // descent stalled (dependent constraints); fall back to the exact solver
  if (m <= 16) {
    double viol = detail::kkt_violation(H, b, v);
    detail::active_set_enumeration(H, b, v, viol);
  }
  return v;
}

}  // namespace regcl
