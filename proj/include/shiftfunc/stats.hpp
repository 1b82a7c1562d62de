#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "shiftfunc/errors.hpp"

namespace shiftfunc {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct SampleStats {
  long n = 0;
  double mean = 0.0;
  double mean_se = 0.0;
  double pop_variance = 0.0;  // (1/n) sum (v - mean)^2
  double variance_se = 0.0;   // delta-method from the fourth central moment
};

inline SampleStats sample_stats(std::span<const double> v) {
  SampleStats s;
  s.n = static_cast<long>(v.size());
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - s.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(s.n);
  m4 /= static_cast<double>(s.n);
  s.pop_variance = m2;
  if (s.n > 1) {
    s.mean_se = std::sqrt(m2 / static_cast<double>(s.n - 1));
    s.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(s.n));
  }
  return s;
}

// Two-sided Kolmogorov-Smirnov distance of the sample against the standard
// normal distribution function, with exact CDF evaluation (no binning).
inline double ks_statistic_normal(std::vector<double> samples) {
  const std::size_t n = samples.size();
  if (n < 1) throw config_error("ks: empty sample");
  std::sort(samples.begin(), samples.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = normal_cdf(samples[i]);
    const double lo = c - static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - c;
    d = std::max(d, std::max(lo, hi));
  }
  return d;
}

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  int n_used = 0;
  bool reliable = false;
};

// Unweighted least squares of log(y) on log(x).
inline SlopeFit fit_loglog(std::span<const double> xs, std::span<const double> ys) {
  SlopeFit fit;
  const std::size_t n = xs.size();
  if (n != ys.size() || n < 2) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  if (denom == 0.0) return fit;
  fit.slope = (dn * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / dn;
  fit.n_used = static_cast<int>(n);
  fit.reliable = true;
  return fit;
}

}  // namespace shiftfunc
