#pragma once

#include "gbc/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace gbc {

struct NelderMeadOptions {
  int max_evals = 2000;
  double initial_step = 0.5;
  double f_tol = 1e-8;  // relative spread of simplex values
  double x_tol = 1e-5;  // simplex diameter
};

struct NelderMeadResult {
  VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
};

/// Minimizes `f` from `x0` with the standard reflection / expansion /
/// contraction / shrink moves. Non-finite objective values are treated as +inf.
template <typename F>
NelderMeadResult nelder_mead(F&& f, const VectorXd& x0, const NelderMeadOptions& opt = {}) {
  const Eigen::Index p = x0.size();
  if (p == 0) throw ArgumentError("nelder_mead: empty parameter vector");
  constexpr double inf = std::numeric_limits<double>::infinity();
  NelderMeadResult res;
  auto eval = [&](const VectorXd& x) {
    ++res.evals;
    const double v = f(x);
    return std::isfinite(v) ? v : inf;
  };

  std::vector<VectorXd> pts(static_cast<std::size_t>(p + 1), x0);
  std::vector<double> vals(pts.size());
  for (Eigen::Index j = 0; j < p; ++j) pts[static_cast<std::size_t>(j + 1)](j) += opt.initial_step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  while (res.evals < opt.max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double diam = 0.0;
    for (const auto& x : pts) diam = std::max(diam, (x - pts[best]).lpNorm<Eigen::Infinity>());
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(spread) && spread <= opt.f_tol * (std::abs(vals[best]) + 1e-12) &&
        diam <= opt.x_tol) {
      res.converged = true;
      break;
    }

    VectorXd centroid = VectorXd::Zero(p);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(p);

    const VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                : VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.f = *it;
  return res;
}

}  // namespace gbc
