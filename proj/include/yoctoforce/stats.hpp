#pragma once

// Small statistics helpers: moments, 2x2 covariance eigendecomposition for
// error ellipses, and the chi-squared quantile used for confidence scaling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace yf {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample variance.
inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("variance: need >= 2 samples");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Sample covariance matrix of 2-d points (unbiased), row-major
// [var_x, cov; cov, var_y], plus the sample mean.
struct Covariance2 {
  double mean_x = 0.0, mean_y = 0.0;
  double var_x = 0.0, var_y = 0.0, cov = 0.0;
};

inline Covariance2 covariance2(const std::vector<std::array<double, 2>>& pts) {
  if (pts.size() < 2)
    throw std::invalid_argument("covariance2: need >= 2 points (got " +
                                std::to_string(pts.size()) + ")");
  Covariance2 c;
  for (const auto& p : pts) {
    c.mean_x += p[0];
    c.mean_y += p[1];
  }
  const double n = static_cast<double>(pts.size());
  c.mean_x /= n;
  c.mean_y /= n;
  for (const auto& p : pts) {
    const double dx = p[0] - c.mean_x;
    const double dy = p[1] - c.mean_y;
    c.var_x += dx * dx;
    c.var_y += dy * dy;
    c.cov += dx * dy;
  }
  c.var_x /= n - 1.0;
  c.var_y /= n - 1.0;
  c.cov /= n - 1.0;
  return c;
}

// Eigen-decomposition of a symmetric 2x2 matrix [[a, b], [b, d]], closed
// form. Eigenvalues descending; angle is the major-axis direction in rad.
struct Eigen2 {
  double lambda_max = 0.0, lambda_min = 0.0;
  double angle = 0.0;
};

inline Eigen2 eigen2(double a, double b, double d) {
  Eigen2 e;
  const double tr_half = 0.5 * (a + d);
  const double diff_half = 0.5 * (a - d);
  const double root = std::sqrt(diff_half * diff_half + b * b);
  e.lambda_max = tr_half + root;
  e.lambda_min = tr_half - root;
  // Major axis: eigenvector of lambda_max. For b == 0 the matrix is already
  // diagonal and the axis is x or y.
  if (b == 0.0)
    e.angle = (a >= d) ? 0.0 : std::atan2(1.0, 0.0);
  else
    e.angle = std::atan2(e.lambda_max - a, b);
  return e;
}

// Quantile of the chi-squared distribution with 2 degrees of freedom:
// P(X <= q) = confidence  =>  q = -2 ln(1 - confidence).
inline double chi2_quantile_2dof(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("chi2_quantile_2dof: confidence must be in (0, 1)");
  return -2.0 * std::log1p(-confidence);
}

// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF given as
// a callable; used by the test suite to validate synthesized distributions.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  return d;
}

} // namespace yf
