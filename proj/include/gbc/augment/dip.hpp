#pragma once

#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"
#include "gbc/iqn/loss.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace gbc::augment {

namespace detail {

/// Convex (lower) or concave (upper) hull vertices of (x_i, i), i in [lo, hi].
inline std::vector<std::size_t> hull(const std::vector<double>& x, std::size_t lo, std::size_t hi, bool lower) {
  std::vector<std::size_t> h;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    const double ax = x[a] - x[o], ay = static_cast<double>(a) - static_cast<double>(o);
    const double bx = x[b] - x[o], by = static_cast<double>(b) - static_cast<double>(o);
    return ax * by - ay * bx;
  };
  for (std::size_t i = lo; i <= hi; ++i) {
    while (h.size() >= 2) {
      const double c = cross(h[h.size() - 2], h.back(), i);
      if (lower ? c <= 0.0 : c >= 0.0)
        h.pop_back();
      else
        break;
    }
    h.push_back(i);
  }
  return h;
}

/// Piecewise-linear hull value at every index in [lo, hi] (count units).
inline std::vector<double> hull_values(const std::vector<double>& x, const std::vector<std::size_t>& h,
                                       std::size_t lo, std::size_t hi) {
  std::vector<double> v(hi - lo + 1);
  std::size_t seg = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    while (seg + 1 < h.size() && h[seg + 1] < i) ++seg;
    const std::size_t a = h[seg], b = seg + 1 < h.size() ? h[seg + 1] : h[seg];
    if (i == a || a == b || x[b] == x[a]) {
      v[i - lo] = static_cast<double>(i == b ? b : a);
    } else {
      const double t = (x[i] - x[a]) / (x[b] - x[a]);
      v[i - lo] = static_cast<double>(a) + t * static_cast<double>(b - a);
    }
  }
  return v;
}

}  // namespace detail

/// Hartigan's dip statistic of a sample.
///
/// The empirical CDF (in counts) jumps from i to i + 1 at the i-th order
/// statistic. The modal interval [lo, hi] is narrowed by alternating the
/// greatest convex minorant and least concave majorant on it; the dip is half
/// the largest unavoidable deviation, divided by n.
inline double dip_statistic(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) return 0.0;

  std::size_t lo = 0, hi = n - 1;
  double D = 0.0;
  while (true) {
    const auto g = detail::hull(x, lo, hi, true);
    const auto h = detail::hull(x, lo, hi, false);
    const auto gv = detail::hull_values(x, g, lo, hi);
    const auto hv = detail::hull_values(x, h, lo, hi);
    double d = 0.0;
    std::size_t at = lo;
    for (std::size_t i = lo; i <= hi; ++i) {
      const double gap = hv[i - lo] - gv[i - lo] + 1.0;
      if (gap > d) {
        d = gap;
        at = i;
      }
    }
    if (d <= D) break;
    const std::size_t new_lo = *std::prev(std::upper_bound(g.begin(), g.end(), at));
    const std::size_t new_hi = *std::lower_bound(h.begin(), h.end(), at);
    for (std::size_t i = lo; i <= new_lo; ++i)
      D = std::max(D, static_cast<double>(i) + 1.0 - gv[i - lo]);
    for (std::size_t i = new_hi; i <= hi; ++i)
      D = std::max(D, hv[i - lo] - static_cast<double>(i) + 1.0);
    if (new_lo == lo && new_hi == hi) {
      D = std::max(D, d);
      break;
    }
    lo = new_lo;
    hi = new_hi;
  }
  return D / (2.0 * static_cast<double>(n));
}

inline double dip_statistic(const VectorXd& y) {
  return dip_statistic(std::vector<double>(y.data(), y.data() + y.size()));
}

struct DipTest {
  double dip = 0.0;
  double p_value = 1.0;
  int replicates = 0;
};

/// Dip test with a Monte Carlo p-value under the uniform null (the least
/// favourable unimodal law): p = (1 + #{null dips >= dip}) / (1 + R).
inline DipTest dip_test(const VectorXd& y, int replicates, SeededRng rng) {
  if (replicates < 1) throw ArgumentError("dip_test: need at least one replicate");
  DipTest t;
  t.dip = dip_statistic(y);
  t.replicates = replicates;
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<double> u(n);
  int exceed = 0;
  for (int r = 0; r < replicates; ++r) {
    for (auto& v : u) v = rng.uniform();
    if (dip_statistic(u) >= t.dip) ++exceed;
  }
  t.p_value = (1.0 + exceed) / (1.0 + replicates);
  return t;
}

inline constexpr double kBimodalPValue = 0.05;

struct WeightChoice {
  iqn::LossWeights weights;
  bool bimodal = false;
  bool overridden = false;
  DipTest test;
};

/// Quantile-dominant weights when training responses look bimodal
/// (dip-test p < 0.05), default weights otherwise; an override always wins.
inline WeightChoice select_loss_weights(const VectorXd& y_train, std::optional<iqn::LossWeights> manual,
                                        SeededRng rng, int replicates = 500) {
  WeightChoice c;
  if (manual) {
    c.weights = *manual;
    c.overridden = true;
    return c;
  }
  c.test = dip_test(y_train, replicates, rng);
  c.bimodal = c.test.p_value < kBimodalPValue;
  c.weights = c.bimodal ? iqn::LossWeights::quantile_dominant() : iqn::LossWeights::standard();
  return c;
}

}  // namespace gbc::augment
