#pragma once

#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"

#include <algorithm>
#include <concepts>
#include <optional>
#include <vector>

namespace gbc::iqn {

/// Anything that maps raw inputs and quantile levels to (mu, q) in response units.
template <typename M>
concept HeadModel = requires(const M& m, const MatrixXd& X, const VectorXd& t) {
  { m.heads(X, t) } -> std::convertible_to<MatrixXd>;
};

/// B generated responses at one input and the levels that produced them.
struct PredictiveSamples {
  VectorXd values;
  VectorXd taus;
  VectorXd input;

  Eigen::Index size() const { return values.size(); }
};

struct SampleOptions {
  /// Diagnostic hook, not part of the sampling algorithm: evaluates every draw
  /// at this level instead of a uniform one.
  std::optional<double> forced_tau;
};

/// Regular grid m / (M + 1), m = 1..M.
inline std::vector<double> quantile_grid(int M) {
  if (M < 1) throw ArgumentError("quantile_grid: M must be >= 1");
  std::vector<double> levels(static_cast<std::size_t>(M));
  for (int m = 1; m <= M; ++m) levels[static_cast<std::size_t>(m - 1)] = static_cast<double>(m) / (M + 1);
  return levels;
}

inline void check_levels(const std::vector<double>& levels) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0))
      throw ArgumentError("quantile levels must lie in (0, 1)");
    if (i > 0 && levels[i] < levels[i - 1]) throw ArgumentError("quantile levels must be sorted");
  }
}

/// Draws B predictive samples at `x`. Only the quantile head is returned.
template <HeadModel M>
PredictiveSamples sample_predictive(const M& model, const VectorXd& x, int B, SeededRng& rng,
                                    const SampleOptions& opts = {}) {
  if (B < 1) throw ArgumentError("sample_predictive: B must be >= 1");
  PredictiveSamples s;
  s.input = x;
  s.taus.resize(B);
  for (int b = 0; b < B; ++b) s.taus(b) = opts.forced_tau ? *opts.forced_tau : rng.uniform();
  const MatrixXd X = x.transpose().replicate(B, 1);
  s.values = model.heads(X, s.taus).col(1);
  return s;
}

/// Quantile head at each level for every row of X (result is n x levels).
template <HeadModel M>
MatrixXd quantile_matrix(const M& model, const MatrixXd& X, const std::vector<double>& levels) {
  check_levels(levels);
  const auto n = X.rows();
  const auto L = static_cast<Eigen::Index>(levels.size());
  MatrixXd rep(n * L, X.cols());
  VectorXd taus(n * L);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = 0; l < L; ++l) {
      rep.row(i * L + l) = X.row(i);
      taus(i * L + l) = levels[static_cast<std::size_t>(l)];
    }
  const MatrixXd h = model.heads(rep, taus);
  MatrixXd Q(n, L);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = 0; l < L; ++l) Q(i, l) = h(i * L + l, 1);
  return Q;
}

template <HeadModel M>
VectorXd predict_quantiles(const M& model, const VectorXd& x, const std::vector<double>& levels) {
  return quantile_matrix(model, MatrixXd(x.transpose()), levels).row(0).transpose();
}

/// Conditional-median estimate (quantile head at 0.5) for each row of X.
template <HeadModel M>
VectorXd predict_median(const M& model, const MatrixXd& X) {
  return quantile_matrix(model, X, {0.5}).col(0);
}

/// Adjacent-level crossing summary of a quantile matrix (rows = inputs,
/// columns = increasing levels).
struct CrossingStats {
  double fraction = 0.0;          // crossings / adjacent pairs
  double max_relative_size = 0.0;  // largest crossing divided by that row's interquartile width
};

inline CrossingStats crossing_stats(const MatrixXd& Q, const std::vector<double>& levels) {
  CrossingStats s;
  if (Q.cols() < 2 || Q.rows() == 0) return s;
  auto nearest = [&](double t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < levels.size(); ++i)
      if (std::abs(levels[i] - t) < std::abs(levels[best] - t)) best = i;
    return static_cast<Eigen::Index>(best);
  };
  const auto i25 = nearest(0.25), i75 = nearest(0.75);
  long crossings = 0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    const double iqr = std::max(Q(i, i75) - Q(i, i25), 1e-12);
    for (Eigen::Index m = 0; m + 1 < Q.cols(); ++m) {
      const double gap = Q(i, m) - Q(i, m + 1);
      if (gap > 0.0) {
        ++crossings;
        s.max_relative_size = std::max(s.max_relative_size, gap / iqr);
      }
    }
  }
  s.fraction = static_cast<double>(crossings) / static_cast<double>(Q.rows() * (Q.cols() - 1));
  return s;
}

}  // namespace gbc::iqn
