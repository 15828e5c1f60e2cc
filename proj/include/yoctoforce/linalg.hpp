#pragma once

// Minimal dense symmetric linear algebra for the fitter's normal equations:
// Cholesky factorization, solve, and inverse for matrices of ~a dozen rows.

#include <cmath>
#include <cstddef>
#include <vector>

namespace yf::detail {

// Row-major square matrix, value-semantic, sized at construction.
struct SquareMatrix {
  int n = 0;
  std::vector<double> a;

  SquareMatrix() = default;
  explicit SquareMatrix(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Returns false (leaving L unspecified) if the matrix is not numerically PD.
inline bool cholesky(const SquareMatrix& m, SquareMatrix& l) {
  const int n = m.n;
  l = SquareMatrix(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return true;
}

// Solve (L L^T) x = b given the Cholesky factor L.
inline std::vector<double> cholesky_solve(const SquareMatrix& l,
                                          const std::vector<double>& b) {
  const int n = l.n;
  std::vector<double> x(b);
  for (int i = 0; i < n; ++i) {  // forward: L y = b
    double s = x[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) s -= l.at(i, k) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / l.at(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {  // backward: L^T x = y
    double s = x[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) s -= l.at(k, i) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / l.at(i, i);
  }
  return x;
}

// Inverse of (L L^T) given the Cholesky factor L, via n unit-vector solves.
inline SquareMatrix cholesky_inverse(const SquareMatrix& l) {
  const int n = l.n;
  SquareMatrix inv(n);
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    const std::vector<double> col = cholesky_solve(l, e);
    e[static_cast<std::size_t>(j)] = 0.0;
    for (int i = 0; i < n; ++i) inv.at(i, j) = col[static_cast<std::size_t>(i)];
  }
  // Symmetrize against round-off.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      const double s = 0.5 * (inv.at(i, j) + inv.at(j, i));
      inv.at(i, j) = s;
      inv.at(j, i) = s;
    }
  return inv;
}

} // namespace yf::detail
