#pragma once

#include "gbc/core/rng.hpp"
#include "gbc/core/stats.hpp"
#include "gbc/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace gbc::augment {

/// Two-component 1-D Gaussian mixture; component 1 has the larger mean.
struct Gmm1dFit {
  double mu0 = 0, mu1 = 0;
  double v0 = 1, v1 = 1;
  double pi0 = 0.5, pi1 = 0.5;
  MatrixXd responsibilities;  // n x 2
  std::vector<int> hard_labels;
  double log_likelihood = 0;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

struct EmOptions {
  int max_iter = 5000;
  /// Stop when the mean per-point log-likelihood changes by less than this.
  double tol = 1e-9;
  int max_restarts = 5;
  /// Variances below floor_factor * var(y) count as a collapse.
  double floor_factor = 1e-6;
};

namespace detail {

inline double log_normal_pdf(double y, double mu, double v) {
  const double r = y - mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * v) + r * r / v);
}

/// One EM run from the given start; returns false on variance collapse.
inline bool run_em(const VectorXd& y, double floor, const EmOptions& opt, Gmm1dFit& f) {
  const Eigen::Index n = y.size();
  f.responsibilities.resize(n, 2);
  double prev = -std::numeric_limits<double>::infinity();
  f.converged = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = std::log(f.pi0) + log_normal_pdf(y(i), f.mu0, f.v0);
      const double b = std::log(f.pi1) + log_normal_pdf(y(i), f.mu1, f.v1);
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      ll += lse;
      f.responsibilities(i, 0) = std::exp(a - lse);
      f.responsibilities(i, 1) = std::exp(b - lse);
    }
    const double n0 = f.responsibilities.col(0).sum(), n1 = f.responsibilities.col(1).sum();
    if (n0 <= 0.0 || n1 <= 0.0) return false;
    f.pi0 = n0 / static_cast<double>(n);
    f.pi1 = 1.0 - f.pi0;
    f.mu0 = f.responsibilities.col(0).dot(y) / n0;
    f.mu1 = f.responsibilities.col(1).dot(y) / n1;
    f.v0 = f.responsibilities.col(0).dot((y.array() - f.mu0).square().matrix()) / n0;
    f.v1 = f.responsibilities.col(1).dot((y.array() - f.mu1).square().matrix()) / n1;
    if (!(f.v0 >= floor) || !(f.v1 >= floor)) return false;
    f.iterations = it;
    f.log_likelihood = ll;
    const double mean_ll = ll / static_cast<double>(n);
    if (std::abs(mean_ll - prev) < opt.tol) {
      f.converged = true;
      break;
    }
    prev = mean_ll;
  }
  return true;
}

}  // namespace detail

/// EM for a two-component mixture on marginal responses.
///
/// The first start places the means at the 25th/75th percentiles with equal
/// weights and the pooled variance. A variance collapse restarts from two
/// random data points drawn from `rng`; after max_restarts failed restarts
/// the fit is declared degenerate.
inline Gmm1dFit em_fit_1d(const VectorXd& y, const EmOptions& opt, SeededRng rng) {
  const Eigen::Index n = y.size();
  if (n < 4) throw ArgumentError("em_fit_1d: need at least 4 observations");
  if (!y.allFinite()) throw DomainError("em_fit_1d: non-finite response");
  const double var = (y.array() - y.mean()).square().sum() / static_cast<double>(n);
  if (!(var > 0.0)) throw DegenerateFit("em_fit_1d: responses have zero variance");
  const double floor = opt.floor_factor * var;

  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());

  Gmm1dFit f;
  for (int attempt = 0; attempt <= opt.max_restarts; ++attempt) {
    if (attempt == 0) {
      f.mu0 = sorted_quantile(sorted, 0.25);
      f.mu1 = sorted_quantile(sorted, 0.75);
    } else {
      const double a = y(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
      double b = a;
      for (int tries = 0; tries < 100 && b == a; ++tries)
        b = y(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
      f.mu0 = std::min(a, b);
      f.mu1 = std::max(a, b);
    }
    f.pi0 = f.pi1 = 0.5;
    f.v0 = f.v1 = var;
    f.restarts = attempt;
    if (detail::run_em(y, floor, opt, f)) {
      if (f.mu0 > f.mu1) {
        std::swap(f.mu0, f.mu1);
        std::swap(f.v0, f.v1);
        std::swap(f.pi0, f.pi1);
        f.responsibilities.col(0).swap(f.responsibilities.col(1));
      }
      f.hard_labels.resize(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        f.hard_labels[static_cast<std::size_t>(i)] = f.responsibilities(i, 1) > f.responsibilities(i, 0) ? 1 : 0;
      return f;
    }
  }
  throw DegenerateFit("em_fit_1d: variance collapsed in every one of " +
                      std::to_string(opt.max_restarts + 1) + " starts");
}

inline Gmm1dFit em_fit_1d(const VectorXd& y, SeededRng rng) { return em_fit_1d(y, EmOptions{}, rng); }

}  // namespace gbc::augment
