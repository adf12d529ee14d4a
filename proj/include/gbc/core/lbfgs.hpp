#pragma once

#include "gbc/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace gbc {

struct LbfgsOptions {
  int max_iter = 100;
  int history = 8;
  double f_tol = 1e-10;  // relative decrease per iteration
  double g_tol = 1e-7;   // max |gradient| relative to max(1, |f|)
  int max_backtracks = 30;
};

struct LbfgsResult {
  VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evals = 0;
  bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking. `fg(x, grad)` returns f(x)
/// and writes the gradient; a non-finite value rejects the trial step.
template <typename FG>
LbfgsResult lbfgs(FG&& fg, const VectorXd& x0, const LbfgsOptions& opt = {}) {
  LbfgsResult res;
  VectorXd x = x0, g(x0.size());
  double f = fg(x, g);
  ++res.evals;
  if (!std::isfinite(f) || !g.allFinite()) {
    res.x = x;
    return res;
  }
  std::deque<VectorXd> S, Y;
  std::deque<double> rho;
  for (; res.iterations < opt.max_iter; ++res.iterations) {
    if (g.lpNorm<Eigen::Infinity>() <= opt.g_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }
    VectorXd q = g;
    std::vector<double> a(S.size());
    for (std::size_t k = S.size(); k-- > 0;) {
      a[k] = rho[k] * S[k].dot(q);
      q -= a[k] * Y[k];
    }
    double gamma = 1.0 / std::max(1.0, g.norm());
    if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
    VectorXd dir = gamma * q;
    for (std::size_t k = 0; k < S.size(); ++k) dir += S[k] * (a[k] - rho[k] * Y[k].dot(dir));
    dir = -dir;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      S.clear(), Y.clear(), rho.clear();
      dir = -g / std::max(1.0, g.norm());
      slope = g.dot(dir);
    }

    double step = 1.0, f_new = f;
    VectorXd x_new, g_new(x.size());
    bool accepted = false;
    for (int b = 0; b < opt.max_backtracks; ++b, step *= 0.5) {
      x_new = x + step * dir;
      f_new = fg(x_new, g_new);
      ++res.evals;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    const VectorXd s = x_new - x, y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s), Y.push_back(y), rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opt.history) S.pop_front(), Y.pop_front(), rho.pop_front();
    }
    const double f_old = f;
    x = x_new, g = g_new, f = f_new;
    if (f_old - f <= opt.f_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  res.x = x;
  res.f = f;
  return res;
}

}  // namespace gbc
