#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls into the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

/// One-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic p-value of the KS statistic (Kolmogorov series with the
/// Stephens small-sample correction).
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = 2.0 * (j % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// Log marginal likelihood of y under y = theta*l + e, theta ~ N(0, sigma2*v),
/// e ~ N(0, sigma2 I), sigma2 ~ IG(a, b): a multivariate t evaluated with the
/// Sherman-Morrison identity (include=false drops the column).
inline long double log_ml_single(const Eigen::VectorXd& y, const Eigen::VectorXd& l, bool include, long double v,
                                 long double a, long double b) {
  const long double n = static_cast<long double>(y.size());
  long double yy = 0, ly = 0, ll = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    yy += static_cast<long double>(y[i]) * y[i];
    ly += static_cast<long double>(l[i]) * y[i];
    ll += static_cast<long double>(l[i]) * l[i];
  }
  long double quad = yy;
  long double logdet = 0;
  if (include) {
    quad = yy - v * ly * ly / (1 + v * ll);
    logdet = std::log1p(v * ll);
  }
  return std::lgamma(a + n / 2) - std::lgamma(a) + a * std::log(b) - n / 2 * std::log(2 * static_cast<long double>(M_PI)) -
         logdet / 2 - (a + n / 2) * std::log(b + quad / 2);
}

/// Least-squares slope of log(err) against log(h).
inline double log_slope(const std::vector<double>& h, const std::vector<double>& err) {
  const auto n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
