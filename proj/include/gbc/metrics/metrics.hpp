#pragma once

#include "gbc/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gbc::metrics {

namespace detail {

/// Mean of |q_m - y|, accumulated relative to the first term so that a
/// constant forecast returns |q - y| exactly.
template <typename Q>
double mean_abs_error(const Q& q, Eigen::Index M, double y) {
  const double a0 = std::abs(q(0) - y);
  double s = 0.0;
  for (Eigen::Index m = 1; m < M; ++m) s += std::abs(q(m) - y) - a0;
  return a0 + s / static_cast<double>(M);
}

}  // namespace detail

/// (1/M) sum |q_m - y| - (1/(2 M^2)) sum_m sum_m' |q_m - q_m'|, evaluated literally.
template <typename Q>
double crps_reference(const Q& q, double y) {
  const Eigen::Index M = q.size();
  if (M < 1) throw ArgumentError("crps: need at least one quantile");
  double pair = 0.0;
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) pair += std::abs(q(i) - q(j));
  const double Md = static_cast<double>(M);
  return detail::mean_abs_error(q, M, y) - pair / (2.0 * Md * Md);
}

/// Same estimator in O(M log M): for sorted q, sum_m sum_m' |q_m - q_m'| =
/// 2 sum_k (2k - M - 1) q_(k); terms are paired k with M + 1 - k.
template <typename Q>
double crps_from_quantiles(const Q& q, double y) {
  const Eigen::Index M = q.size();
  if (M < 1) throw ArgumentError("crps: need at least one quantile");
  std::vector<double> s(static_cast<std::size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) s[static_cast<std::size_t>(m)] = q(m);
  std::sort(s.begin(), s.end());
  double half_pair = 0.0;  // sum_k (2k - M - 1) q_(k), k = 1..M
  for (Eigen::Index k = 1; 2 * k <= M; ++k) {
    const auto w = static_cast<double>(M + 1 - 2 * k);
    half_pair += w * (s[static_cast<std::size_t>(M - k)] - s[static_cast<std::size_t>(k - 1)]);
  }
  const double Md = static_cast<double>(M);
  return detail::mean_abs_error(q, M, y) - half_pair / (Md * Md);
}

inline void require_same_length(const VectorXd& a, const VectorXd& b, const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  if (a.size() == 0) throw ShapeError(std::string(what) + ": empty input");
}

inline double rmse(const VectorXd& pred, const VectorXd& y) {
  require_same_length(pred, y, "rmse");
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

/// Root mean squared percentage error, in percent.
inline double rmspe(const VectorXd& pred, const VectorXd& y) {
  require_same_length(pred, y, "rmspe");
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0.0) throw ArgumentError("rmspe: target " + std::to_string(i) + " is zero");
    const double e = 100.0 * (pred(i) - y(i)) / y(i);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(y.size()));
}

/// Fraction of y inside [lower, upper]; a crossed interval is an error.
inline double coverage(const VectorXd& lower, const VectorXd& upper, const VectorXd& y) {
  require_same_length(lower, y, "coverage");
  require_same_length(upper, y, "coverage");
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (lower(i) > upper(i))
      throw ArgumentError("coverage: interval " + std::to_string(i) + " is crossed (lower " +
                          std::to_string(lower(i)) + " > upper " + std::to_string(upper(i)) + ")");
    if (y(i) >= lower(i) && y(i) <= upper(i)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(y.size());
}

inline double pinball_loss(double tau, double y, double q) {
  const double e = y - q;
  return std::max(tau * e, (tau - 1.0) * e);
}

}  // namespace gbc::metrics
