#pragma once

#include "gbc/core/dataset.hpp"
#include "gbc/core/lbfgs.hpp"
#include "gbc/core/nelder_mead.hpp"
#include "gbc/core/normal.hpp"
#include "gbc/core/parallel.hpp"
#include "gbc/core/rng.hpp"
#include "gbc/core/stats.hpp"
#include "gbc/core/types.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace gbc::gp {

using ColMatrix = Eigen::MatrixXd;

struct GpHyperparams {
  double signal_variance = 1.0;
  VectorXd length_scales;
  double nugget = 1e-6;

  void validate() const {
    if (!(signal_variance > 0.0) || !(nugget > 0.0) || length_scales.size() == 0 ||
        !(length_scales.array() > 0.0).all())
      throw ArgumentError("GpHyperparams: variance, nugget and length scales must be positive");
  }
};

inline double matern52_corr(double r) {
  const double s = std::sqrt(5.0) * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

template <typename A, typename B>
double matern52(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& xp, const GpHyperparams& hp) {
  if (x.size() != xp.size() || x.size() != hp.length_scales.size())
    throw ShapeError("matern52: dimension mismatch");
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double t = (x(j) - xp(j)) / hp.length_scales(j);
    r2 += t * t;
  }
  return hp.signal_variance * matern52_corr(std::sqrt(r2));
}

/// variance * exp(-|x - x'|^2 / length).
template <typename A, typename B>
double se_kernel(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& xp, double variance, double length) {
  if (x.size() != xp.size()) throw ShapeError("se_kernel: dimension mismatch");
  return variance * std::exp(-(x - xp).squaredNorm() / length);
}

namespace detail {

/// Squared Euclidean distances between the rows of A and B.
inline ColMatrix sq_dist(const MatrixXd& A, const MatrixXd& B) {
  const VectorXd a2 = A.rowwise().squaredNorm(), b2 = B.rowwise().squaredNorm();
  ColMatrix D = -2.0 * (A * B.transpose());
  D.colwise() += a2;
  D.rowwise() += b2.transpose();
  return D.cwiseMax(0.0);
}

inline MatrixXd scale_cols(const MatrixXd& X, const VectorXd& ls) {
  return X.array().rowwise() / ls.transpose().array();
}

}  // namespace detail

/// Unit-variance Matérn-5/2 correlation between the rows of A and B.
inline ColMatrix matern52_correlation(const MatrixXd& A, const MatrixXd& B, const VectorXd& ls) {
  if (A.cols() != ls.size() || B.cols() != ls.size()) throw ShapeError("matern52: dimension mismatch");
  ColMatrix C = detail::sq_dist(detail::scale_cols(A, ls), detail::scale_cols(B, ls));
  C = C.unaryExpr([](double r2) { return matern52_corr(std::sqrt(r2)); });
  return C;
}

/// Kernel matrix sigma_f^2 C(A, A) + g I.
inline ColMatrix covariance_matrix(const MatrixXd& X, const GpHyperparams& hp) {
  ColMatrix K = hp.signal_variance * matern52_correlation(X, X, hp.length_scales);
  K.diagonal().array() += hp.nugget;
  return K;
}

/// log N(y | mean, K) through a Cholesky factorization of K.
inline double log_marginal_likelihood(const MatrixXd& X, const VectorXd& y, const GpHyperparams& hp,
                                      double mean) {
  if (X.rows() != y.size()) throw ShapeError("log_marginal_likelihood: X and y disagree");
  hp.validate();
  const Eigen::LLT<ColMatrix> llt(covariance_matrix(X, hp));
  if (llt.info() != Eigen::Success)
    throw ConditioningError("log_marginal_likelihood: covariance is not positive definite");
  const VectorXd r = y.array() - mean;
  const VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(y.size());
  return -0.5 * w.squaredNorm() - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

enum class GpOptimizer { lbfgs, nelder_mead };

struct GpOptions {
  int restarts = 5;
  Eigen::Index max_n = 4000;
  double nugget_floor_factor = 1e-6;
  GpOptimizer optimizer = GpOptimizer::lbfgs;
  bool isotropic = false;  // one length scale shared by every input
  int max_iter = 200;  // L-BFGS iterations, or 10x this many Nelder–Mead evaluations
  int jobs = 1;
};

struct GpModel {
  GpHyperparams hp;
  MatrixXd X;
  VectorXd y;
  double mean = 0.0;
  ColMatrix L;
  VectorXd alpha;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  int evaluations = 0;

  Eigen::Index dim() const { return X.cols(); }
  bool fitted() const { return alpha.size() == y.size() && y.size() > 0; }
};

/// Factorizes the covariance at fixed hyperparameters and caches L and K^-1 (y - mean).
inline GpModel gp_condition(const MatrixXd& X, const VectorXd& y, const GpHyperparams& hp, double mean) {
  if (X.rows() != y.size()) throw ShapeError("gp_condition: X and y disagree");
  if (X.cols() != hp.length_scales.size()) throw ShapeError("gp_condition: length-scale count != input width");
  hp.validate();
  GpModel m;
  m.hp = hp;
  m.X = X;
  m.y = y;
  m.mean = mean;
  const Eigen::LLT<ColMatrix> llt(covariance_matrix(X, hp));
  if (llt.info() != Eigen::Success)
    throw ConditioningError("gp: covariance is not positive definite; raise the nugget floor");
  m.L = llt.matrixL();
  const VectorXd r = y.array() - mean;
  m.alpha = llt.solve(r);
  const VectorXd w = m.L.triangularView<Eigen::Lower>().solve(r);
  m.log_likelihood = -0.5 * w.squaredNorm() - m.L.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
  return m;
}

namespace detail {

struct Profiled {
  double log_likelihood;
  double signal_variance;
};

/// Likelihood with sigma_f^2 profiled out: K = s2 (C + eta I), s2_hat = r' (C + eta I)^-1 r / n.
/// If `grad` is given it receives d(loglik)/d(log l_1..d, log eta).
inline Profiled profiled_likelihood(const MatrixXd& X, const VectorXd& r, const VectorXd& ls, double eta,
                                    VectorXd* grad = nullptr) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  const Eigen::Index n = X.rows(), d = X.cols();
  const MatrixXd U = scale_cols(X, ls);
  ColMatrix C = sq_dist(U, U);
  ColMatrix D;
  if (grad) D.resize(n, n);
  const double s5 = std::sqrt(5.0);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double rr = std::sqrt(C(i, k)), e = std::exp(-s5 * rr);
      if (grad) D(i, k) = (5.0 / 3.0) * (1.0 + s5 * rr) * e;
      C(i, k) = (1.0 + s5 * rr + 5.0 * C(i, k) / 3.0) * e;
    }
  C.diagonal().array() += eta;
  Eigen::LLT<ColMatrix> llt(C);
  if (llt.info() != Eigen::Success) return {ninf, 0.0};
  const VectorXd alpha = llt.solve(r);
  const double s2 = r.dot(alpha) / static_cast<double>(n);
  if (!(s2 > 0.0) || !std::isfinite(s2)) return {ninf, 0.0};
  double logdet = 0.0;
  const auto& LL = llt.matrixLLT();
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(LL(i, i));
  const double ll = -0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * s2) + 1.0) - 0.5 * logdet;
  if (grad) {
    // W = alpha alpha' / s2 - (C + eta I)^-1; dLL/dtheta = tr(W dK/dtheta) / 2.
    ColMatrix W = -llt.solve(ColMatrix::Identity(n, n));
    W.noalias() += (alpha / s2) * alpha.transpose();
    grad->resize(d + 1);
    (*grad)(d) = 0.5 * eta * W.trace();
    W.array() *= D.array();
    const VectorXd rs = W.rowwise().sum();
    const MatrixXd WU = W * U;
    for (Eigen::Index j = 0; j < d; ++j)
      (*grad)(j) = U.col(j).array().square().matrix().dot(rs) - U.col(j).dot(WU.col(j));
  }
  return {ll, s2};
}

}  // namespace detail

/// Maximum-likelihood fit of the Matérn-5/2 ARD GP with a constant mean equal to
/// the response mean. Optimizes (log l_1..d, log eta) with eta = g / sigma_f^2
/// and sigma_f^2 profiled out. The first start is a data-scaled default, the
/// remaining ones are random; the best optimum is kept.
inline GpModel gp_fit(const Dataset& data, const GpOptions& opt, SeededRng& rng) {
  data.validate();
  const Eigen::Index n = data.size(), d = data.dim();
  if (n > opt.max_n)
    throw ArgumentError("gp_fit: n = " + std::to_string(n) + " exceeds the dense-GP cap of " +
                        std::to_string(opt.max_n));
  if (n < 2) throw ArgumentError("gp_fit: need at least 2 observations");
  if (opt.restarts < 1) throw ArgumentError("gp_fit: restarts must be >= 1");
  const double ymean = data.y.mean();
  const VectorXd r = data.y.array() - ymean;
  const double var_y = sample_variance(data.y);
  if (!(var_y > 0.0)) throw DegenerateFit("gp_fit: constant response");
  const double g_floor = opt.nugget_floor_factor * var_y;

  VectorXd span = data.X.colwise().maxCoeff() - data.X.colwise().minCoeff();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(span(j) > 0.0)) span(j) = 1.0;
  const Eigen::Index p = opt.isotropic ? 1 : d;
  const VectorXd log_span = opt.isotropic ? VectorXd::Constant(1, span.array().log().mean())
                                          : VectorXd(span.array().log());
  const double log_eta_lo = std::log(1e-8), log_eta_hi = std::log(1e2);

  // theta = (log l, log eta) clamped to a box; excursions pay a quadratic penalty.
  auto unpack = [&](const VectorXd& theta, VectorXd& clamped) {
    clamped.resize(p + 1);
    for (Eigen::Index j = 0; j < p; ++j)
      clamped(j) = std::clamp(theta(j), log_span(j) + std::log(1e-3), log_span(j) + std::log(1e2));
    clamped(p) = std::clamp(theta(p), log_eta_lo, log_eta_hi);
    return (theta - clamped).squaredNorm();
  };
  auto length_scales = [&](const VectorXd& clamped) {
    return opt.isotropic ? VectorXd(VectorXd::Constant(d, std::exp(clamped(0))))
                         : VectorXd(clamped.head(d).array().exp());
  };
  auto objective = [&](const VectorXd& theta, VectorXd* grad) {
    VectorXd clamped, full;
    const double pen = unpack(theta, clamped);
    const auto res = detail::profiled_likelihood(data.X, r, length_scales(clamped), std::exp(clamped(p)),
                                                 grad ? &full : nullptr);
    if (grad) {
      grad->resize(p + 1);
      if (opt.isotropic)
        (*grad)(0) = -full.head(d).sum();
      else
        grad->head(d) = -full.head(d);
      (*grad)(p) = -full(d);
      for (Eigen::Index j = 0; j <= p; ++j)
        if (theta(j) != clamped(j)) (*grad)(j) = 2.0 * static_cast<double>(n) * (theta(j) - clamped(j));
    }
    return -res.log_likelihood + static_cast<double>(n) * pen;
  };

  std::vector<VectorXd> starts;
  {
    VectorXd t0(p + 1);
    t0.head(p) = log_span.array() + std::log(0.3);
    t0(p) = std::log(0.05);
    starts.push_back(t0);
  }
  for (int s = 1; s < opt.restarts; ++s) {
    VectorXd t(p + 1);
    for (Eigen::Index j = 0; j < p; ++j) t(j) = log_span(j) + rng.uniform(std::log(0.05), std::log(2.0));
    t(p) = rng.uniform(std::log(1e-4), std::log(1.0));
    starts.push_back(t);
  }

  struct Outcome {
    VectorXd x;
    double f;
    int evals;
  };
  std::vector<Outcome> results(starts.size());
  parallel_for(starts.size(), opt.jobs, [&](std::size_t i) {
    if (opt.optimizer == GpOptimizer::lbfgs) {
      LbfgsOptions lo;
      lo.max_iter = opt.max_iter;
      lo.f_tol = 1e-9;
      lo.g_tol = 1e-6;
      const auto res = lbfgs([&](const VectorXd& t, VectorXd& g) { return objective(t, &g); }, starts[i], lo);
      results[i] = {res.x, res.f, res.evals};
    } else {
      NelderMeadOptions nm;
      nm.max_evals = 10 * opt.max_iter;
      nm.f_tol = 1e-9;
      nm.x_tol = 1e-3;
      const auto res = nelder_mead([&](const VectorXd& t) { return objective(t, nullptr); }, starts[i], nm);
      results[i] = {res.x, res.f, res.evals};
    }
  });

  int total_evals = 0;
  std::size_t best = results.size();
  for (std::size_t i = 0; i < results.size(); ++i) {
    total_evals += results[i].evals;
    if (std::isfinite(results[i].f) && (best == results.size() || results[i].f < results[best].f)) best = i;
  }
  if (best == results.size())
    throw ConditioningError("gp_fit: every start failed the Cholesky factorization; raise the nugget floor");

  GpHyperparams hp;
  VectorXd clamped;
  unpack(results[best].x, clamped);
  hp.length_scales = length_scales(clamped);
  const double eta = std::exp(clamped(p));
  hp.signal_variance = detail::profiled_likelihood(data.X, r, hp.length_scales, eta).signal_variance;
  hp.nugget = std::max(eta * hp.signal_variance, g_floor);
  GpModel m = gp_condition(data.X, data.y, hp, ymean);
  m.evaluations = total_evals;
  return m;
}

struct GpPrediction {
  VectorXd mean;
  VectorXd variance;
};

/// Kriging mean and variance; `include_nugget` adds g for noisy-observation intervals.
inline GpPrediction gp_predict(const GpModel& m, const MatrixXd& Xs, bool include_nugget = true) {
  if (!m.fitted()) throw StateError("gp_predict: model is not fitted");
  if (Xs.cols() != m.dim())
    throw ShapeError("gp_predict: input width " + std::to_string(Xs.cols()) + " != " + std::to_string(m.dim()));
  const ColMatrix Ks = m.hp.signal_variance * matern52_correlation(m.X, Xs, m.hp.length_scales);
  GpPrediction p;
  p.mean = (Ks.transpose() * m.alpha).array() + m.mean;
  const ColMatrix V = m.L.triangularView<Eigen::Lower>().solve(Ks);
  p.variance = (m.hp.signal_variance - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  if (include_nugget) p.variance.array() += m.hp.nugget;
  return p;
}

/// Gaussian predictive quantiles mean + z_p sd, one row per input and one column per level.
inline MatrixXd gp_quantile_matrix(const GpModel& m, const MatrixXd& Xs, const std::vector<double>& levels) {
  const auto p = gp_predict(m, Xs, true);
  MatrixXd Q(Xs.rows(), static_cast<Eigen::Index>(levels.size()));
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double z = normal_quantile(levels[k]);
    Q.col(static_cast<Eigen::Index>(k)) = p.mean.array() + z * p.variance.array().sqrt();
  }
  return Q;
}

struct SeKernel {
  double variance = 1.0;
  double length = 1.0;
};

/// mean + L z with L the Cholesky factor of the SE kernel matrix. Diagonal
/// jitter starts at 1e-8 and grows tenfold up to 1e-4.
inline VectorXd gp_prior_sample(const MatrixXd& points, const SeKernel& k, double mean, SeededRng& rng) {
  if (!(k.variance > 0.0) || !(k.length > 0.0)) throw ArgumentError("gp_prior_sample: kernel must be positive");
  const Eigen::Index n = points.rows();
  ColMatrix K = detail::sq_dist(points, points);
  K = K.unaryExpr([&](double r2) { return k.variance * std::exp(-r2 / k.length); });
  for (double jitter = 1e-8; jitter <= 1e-4 * (1.0 + 1e-9); jitter *= 10.0) {
    ColMatrix Kj = K;
    Kj.diagonal().array() += jitter;
    const Eigen::LLT<ColMatrix> llt(Kj);
    if (llt.info() != Eigen::Success) continue;
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    return (llt.matrixL() * z).array() + mean;
  }
  throw ConditioningError("gp_prior_sample: kernel matrix not positive definite with jitter up to 1e-4");
}

}  // namespace gbc::gp
