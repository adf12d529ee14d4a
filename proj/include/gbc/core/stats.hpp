#pragma once

#include "gbc/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gbc {

/// Median; an even count averages the two middle values.
inline double median(const VectorXd& v) {
  if (v.size() == 0) throw ArgumentError("median of an empty vector");
  std::vector<double> s(v.data(), v.data() + v.size());
  const std::size_t n = s.size(), mid = n / 2;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
  const double upper = s[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline double mean(const VectorXd& v) {
  if (v.size() == 0) throw ArgumentError("mean of an empty vector");
  return v.mean();
}

/// Unbiased sample variance (n - 1 denominator).
inline double sample_variance(const VectorXd& v) {
  if (v.size() < 2) throw ArgumentError("sample variance needs at least 2 values");
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

inline double sample_sd(const VectorXd& v) { return std::sqrt(sample_variance(v)); }

/// Standard error of the mean; 0 for a single value.
inline double standard_error(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

/// Empirical quantile of sorted data with linear interpolation between order
/// statistics (position p (n - 1)).
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Quantile of sorted draws with plotting position p (n + 1): the k-th order
/// statistic sits at level k / (n + 1), matching the regular quantile grid.
inline double grid_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  const double pos = std::clamp(p * (n + 1.0) - 1.0, 0.0, n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("loglog_slope: need >= 2 paired values");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace gbc
