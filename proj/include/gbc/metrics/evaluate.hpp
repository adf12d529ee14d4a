#pragma once

#include "gbc/core/types.hpp"
#include "gbc/ensemble/ensemble.hpp"
#include "gbc/gp/gp.hpp"
#include "gbc/iqn/predict.hpp"
#include "gbc/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

namespace gbc::metrics {

struct MetricReport {
  double rmse = 0.0;
  double rmspe = std::numeric_limits<double>::quiet_NaN();  // NaN when a target is zero
  double crps_mean = 0.0;
  double coverage90 = 0.0;
  VectorXd crps;
  Eigen::Index n_test = 0;
};

/// Anything returning an n x L matrix of predictive quantiles at sorted levels.
template <typename P>
concept QuantilePredictor = requires(const P& p, const MatrixXd& X, const std::vector<double>& levels) {
  { p(X, levels) } -> std::convertible_to<MatrixXd>;
};

inline constexpr double kLowerLevel = 0.05;
inline constexpr double kUpperLevel = 0.95;
inline constexpr int kDefaultGridSize = 99;

/// Scores predictive quantiles `Qgrid` (n x M, levels m/(M+1)) with point
/// predictions and 90% interval endpoints against `y`.
inline MetricReport score(const MatrixXd& Qgrid, const VectorXd& point, const VectorXd& lower,
                          const VectorXd& upper, const VectorXd& y) {
  if (Qgrid.rows() != y.size()) throw ShapeError("score: quantile rows != targets");
  MetricReport r;
  r.n_test = y.size();
  r.rmse = rmse(point, y);
  if ((y.array() != 0.0).all()) r.rmspe = rmspe(point, y);
  r.crps.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) r.crps(i) = crps_from_quantiles(Qgrid.row(i), y(i));
  r.crps_mean = r.crps.mean();
  r.coverage90 = coverage(lower, upper, y);
  return r;
}

/// Point prediction is the predictive median, CRPS uses the M-grid and
/// coverage the 0.05 / 0.95 quantiles.
template <QuantilePredictor P>
MetricReport evaluate(const P& predictor, const MatrixXd& X, const VectorXd& y, int M = kDefaultGridSize) {
  if (X.rows() != y.size()) throw ShapeError("evaluate: X and y disagree");
  const auto grid = iqn::quantile_grid(M);
  std::vector<double> levels = grid;
  for (double extra : {kLowerLevel, 0.5, kUpperLevel})
    if (std::find(levels.begin(), levels.end(), extra) == levels.end()) levels.push_back(extra);
  std::sort(levels.begin(), levels.end());
  auto col = [&](double t) {
    return static_cast<Eigen::Index>(std::find(levels.begin(), levels.end(), t) - levels.begin());
  };
  const MatrixXd Q = predictor(X, levels);
  MatrixXd Qgrid(X.rows(), M);
  for (int m = 0; m < M; ++m) Qgrid.col(m) = Q.col(col(grid[static_cast<std::size_t>(m)]));
  return score(Qgrid, Q.col(col(0.5)), Q.col(col(kLowerLevel)), Q.col(col(kUpperLevel)), y);
}

template <iqn::HeadModel M>
auto iqn_predictor(const M& model) {
  return [&model](const MatrixXd& X, const std::vector<double>& levels) {
    return iqn::quantile_matrix(model, X, levels);
  };
}

template <iqn::HeadModel M>
auto pooled_predictor(const std::vector<M>& members, int B_per_member = 200) {
  return [&members, B_per_member](const MatrixXd& X, const std::vector<double>& levels) {
    return ensemble::pooled_quantile_matrix(members, X, levels, B_per_member);
  };
}

inline auto gp_predictor(const gp::GpModel& model) {
  return [&model](const MatrixXd& X, const std::vector<double>& levels) {
    return gp::gp_quantile_matrix(model, X, levels);
  };
}

}  // namespace gbc::metrics
