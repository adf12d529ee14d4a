#pragma once

#include "gbc/core/types.hpp"

#include <cmath>
#include <string>

namespace gbc::iqn {

/// Weights of the location-anchor, ordering and pinball terms.
struct LossWeights {
  double w1 = 0.3;
  double w2 = 0.3;
  double w3 = 0.4;

  static constexpr LossWeights standard() { return {0.3, 0.3, 0.4}; }
  static constexpr LossWeights quantile_dominant() { return {0.1, 0.2, 0.7}; }

  void validate() const {
    if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0 || !(w1 + w2 + w3 > 0.0))
      throw ArgumentError("LossWeights: weights must be non-negative with positive sum");
  }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

inline double pinball(double tau, double e) { return std::max(tau * e, (tau - 1.0) * e); }

/// CDF level at which the population minimizer of the q-head loss sits for a
/// continuous response. Equals tau only when w2 = 0; the ordering term pushes
/// lower levels down and upper levels up.
inline double effective_level(double tau, const LossWeights& w) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("effective_level: tau must lie in (0, 1)");
  if (tau >= 0.5) {
    const double up = w.w3 * tau + w.w2 * (tau - 0.5);
    const double denom = w.w3 + w.w2 * (tau - 0.5);
    return denom > 0.0 ? up / denom : 1.0;
  }
  const double denom = w.w3 + w.w2 * (0.5 - tau);
  return denom > 0.0 ? w.w3 * tau / denom : 0.0;
}

/// Ordering surrogate: lower levels are penalized for sitting above y,
/// upper levels (tau >= 0.5) for sitting below it.
inline double ordering_penalty(double tau, double y, double q) {
  return tau < 0.5 ? std::max(0.0, q - y) : std::max(0.0, y - q);
}

/// Batch mean of w1|y - mu| + w2|tau - 0.5| m_tau + w3 rho_tau(y - q).
template <typename Scalar>
double three_term_loss(const Vector<Scalar>& y, const Vector<Scalar>& mu, const Vector<Scalar>& q,
                       const Vector<Scalar>& tau, const LossWeights& w) {
  const auto n = y.size();
  if (mu.size() != n || q.size() != n || tau.size() != n)
    throw ShapeError("three_term_loss: batch lengths differ");
  if (n == 0) throw ShapeError("three_term_loss: empty batch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = y(i), t = tau(i), qi = q(i);
    total += w.w1 * std::abs(yi - static_cast<double>(mu(i))) +
             w.w2 * std::abs(t - 0.5) * ordering_penalty(t, yi, qi) + w.w3 * pinball(t, yi - qi);
  }
  return total / static_cast<double>(n);
}

/// Same loss, also writing d(loss)/d(heads) into `dout` (n x 2, columns mu and q).
/// Subgradients at the kinks are zero.
template <typename Scalar>
double three_term_loss_grad(const Vector<Scalar>& y, const Matrix<Scalar>& heads,
                            const Vector<Scalar>& tau, const LossWeights& w, Matrix<Scalar>& dout) {
  const auto n = y.size();
  if (heads.rows() != n || heads.cols() != 2 || tau.size() != n)
    throw ShapeError("three_term_loss_grad: batch lengths differ");
  dout.resize(n, 2);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = y(i), mu = heads(i, 0), qi = heads(i, 1), t = tau(i);
    const double r_mu = yi - mu;
    const double e = yi - qi;
    total += w.w1 * std::abs(r_mu) + w.w2 * std::abs(t - 0.5) * ordering_penalty(t, yi, qi) +
             w.w3 * pinball(t, e);

    const double d_mu = r_mu > 0.0 ? -w.w1 : (r_mu < 0.0 ? w.w1 : 0.0);
    double d_order = 0.0;
    if (t < 0.5) {
      if (qi > yi) d_order = 1.0;
    } else if (yi > qi) {
      d_order = -1.0;
    }
    const double d_pin = e > 0.0 ? -t : (e < 0.0 ? 1.0 - t : 0.0);
    dout(i, 0) = static_cast<Scalar>(d_mu * inv_n);
    dout(i, 1) = static_cast<Scalar>((w.w2 * std::abs(t - 0.5) * d_order + w.w3 * d_pin) * inv_n);
  }
  return total * inv_n;
}

}  // namespace gbc::iqn
