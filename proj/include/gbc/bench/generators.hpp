#pragma once

#include "gbc/bench/lhs.hpp"
#include "gbc/core/dataset.hpp"
#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"
#include "gbc/gp/gp.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace gbc::bench {

namespace detail {
inline void require_unit_cube(const VectorXd& x, Eigen::Index d, const char* name) {
  if (x.size() != d)
    throw ShapeError(std::string(name) + ": expected " + std::to_string(d) + " inputs, got " +
                     std::to_string(x.size()));
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(x(j) >= 0.0 && x(j) <= 1.0))
      throw DomainError(std::string(name) + ": input " + std::to_string(j) + " = " + std::to_string(x(j)) +
                        " outside [0, 1]");
}

inline std::vector<std::string> names(const char* prefix, Eigen::Index d) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < d; ++j) out.push_back(prefix + std::to_string(j + 1));
  return out;
}
}  // namespace detail

/// 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 on [0,1]^10; x6..x10 inert.
inline double friedman(const VectorXd& x) {
  detail::require_unit_cube(x, 10, "friedman");
  return 10.0 * std::sin(std::numbers::pi * x(0) * x(1)) + 20.0 * (x(2) - 0.5) * (x(2) - 0.5) + 10.0 * x(3) +
         5.0 * x(4);
}

/// Michalewicz (m = 10) on [0, pi]^4, inputs given in [0,1]^4. Where the
/// standard function is within 1e-3 of zero (its flat region) 0.5 is added.
inline double michalewicz_offset(const VectorXd& x) {
  detail::require_unit_cube(x, 4, "michalewicz_offset");
  double f = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double z = std::numbers::pi * x(i);
    f -= std::sin(z) * std::pow(std::sin(static_cast<double>(i + 1) * z * z / std::numbers::pi), 20.0);
  }
  return std::abs(f) < 1e-3 ? f + 0.5 : f;
}

/// z1 exp(-z1^2 - z2^2) with z = -2 + 6 x, x in [0,1]^2.
inline double exp2d(const VectorXd& x) {
  detail::require_unit_cube(x, 2, "exp2d");
  const double z1 = -2.0 + 6.0 * x(0), z2 = -2.0 + 6.0 * x(1);
  return z1 * std::exp(-z1 * z1 - z2 * z2);
}

/// Smooth additive sinusoid / quadratic mix on [0,1]^7 with one interaction.
inline double proxy7d(const VectorXd& x) {
  detail::require_unit_cube(x, 7, "proxy7d");
  double f = x(0) * x(1);
  for (Eigen::Index j = 0; j < 7; ++j) {
    const double k = static_cast<double>(j + 1);
    f += std::sin(std::numbers::pi * (k + 1.0) * x(j) / 2.0) / k + (x(j) - 0.5) * (x(j) - 0.5);
  }
  return f;
}

/// sin(6x) + jump * 1{x > 0.5}.
inline double jump1d(double x, double jump = 4.0) { return std::sin(6.0 * x) + (x > 0.5 ? jump : 0.0); }

/// Deterministic test function with its input dimension.
struct TestFunction {
  std::string name;
  Eigen::Index dim;
  std::function<double(const VectorXd&)> f;
};

inline TestFunction test_function(const std::string& name) {
  if (name == "friedman") return {name, 10, friedman};
  if (name == "michalewicz") return {name, 4, michalewicz_offset};
  if (name == "exp2d") return {name, 2, exp2d};
  if (name == "proxy7d") return {name, 7, proxy7d};
  throw ArgumentError("unknown test function '" + name + "' (valid: friedman, michalewicz, exp2d, proxy7d)");
}

/// Dataset from a test function: uniform (or LHS) design on [0,1]^d, y = f + N(0, noise_sd^2).
inline Dataset gen_from_function(const TestFunction& tf, Eigen::Index n, double noise_sd, std::uint64_t seed,
                                 bool use_lhs = false) {
  if (n < 1) throw ArgumentError("generator: n must be positive");
  if (noise_sd < 0.0) throw ArgumentError("generator: noise_sd must be non-negative");
  SeededRng root(seed);
  auto xr = root.split(0), nr = root.split(1);
  Dataset ds;
  ds.X = use_lhs ? lhs(n, tf.dim, xr) : uniform_design(n, tf.dim, xr);
  ds.y.resize(n);
  VectorXd truth(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    truth(i) = tf.f(ds.X.row(i).transpose());
    ds.y(i) = truth(i) + (noise_sd > 0.0 ? noise_sd * nr.normal() : 0.0);
  }
  ds.truth = truth;
  ds.input_names = detail::names("x", tf.dim);
  ds.provenance = tf.name + " n=" + std::to_string(n) + " noise_sd=" + std::to_string(noise_sd) +
                  " seed=" + std::to_string(seed);
  return ds;
}

inline Dataset gen_friedman(Eigen::Index n, double noise_sd, std::uint64_t seed) {
  return gen_from_function(test_function("friedman"), n, noise_sd, seed);
}

struct BgpConfig {
  int d = 2;
  Eigen::Index N = 2000;
  double length = 0.0;  // SE length; 0 means 0.1 d
  double variance = 9.0;
  double mean1 = 0.0;
  double mean2 = 13.0;
  double noise_variance = 4.0;
  std::optional<std::vector<int>> partition;  // a in {-1, +1}^d; drawn when absent
  std::uint64_t seed = 0;

  double se_length() const { return length > 0.0 ? length : 0.1 * d; }

  void validate() const {
    if (d < 1) throw ArgumentError("BgpConfig: d must be positive");
    if (N < 1 || N > 4000) throw ArgumentError("BgpConfig: N must lie in [1, 4000] for dense Cholesky");
    if (partition) {
      if (static_cast<int>(partition->size()) != d) throw ArgumentError("BgpConfig: partition length != d");
      for (int a : *partition)
        if (a != 1 && a != -1) throw ArgumentError("BgpConfig: partition entries must be +-1");
    }
  }
};

/// Two SE-GP draws glued along the hyperplane a.x = 0. Points with a.x >= 0
/// carry regime label 1 and follow the first draw (mean `mean1`); the rest
/// carry label 0 and follow the second (mean `mean2`).
inline Dataset gen_bgp(const BgpConfig& cfg) {
  cfg.validate();
  SeededRng root(cfg.seed);
  auto xr = root.split(0), ar = root.split(1), g1 = root.split(2), g2 = root.split(3), nr = root.split(4);
  Dataset ds;
  ds.X = uniform_design(cfg.N, cfg.d, xr, -0.5, 0.5);
  std::vector<int> a;
  if (cfg.partition)
    a = *cfg.partition;
  else
    for (int j = 0; j < cfg.d; ++j) a.push_back(ar.below(2) == 0 ? -1 : 1);
  const gp::SeKernel k{cfg.variance, cfg.se_length()};
  const VectorXd f1 = gp::gp_prior_sample(ds.X, k, cfg.mean1, g1);
  const VectorXd f2 = gp::gp_prior_sample(ds.X, k, cfg.mean2, g2);
  VectorXd truth(cfg.N);
  std::vector<int> regime(static_cast<std::size_t>(cfg.N));
  ds.y.resize(cfg.N);
  const double noise_sd = std::sqrt(cfg.noise_variance);
  for (Eigen::Index i = 0; i < cfg.N; ++i) {
    double s = 0.0;
    for (int j = 0; j < cfg.d; ++j) s += a[static_cast<std::size_t>(j)] * ds.X(i, j);
    const bool in1 = s >= 0.0;
    regime[static_cast<std::size_t>(i)] = in1 ? 1 : 0;
    truth(i) = in1 ? f1(i) : f2(i);
    ds.y(i) = truth(i) + noise_sd * nr.normal();
  }
  ds.truth = truth;
  ds.regime = regime;
  ds.input_names = detail::names("x", cfg.d);
  std::string part;
  for (int v : a) part += v > 0 ? '+' : '-';
  ds.provenance = "bgp d=" + std::to_string(cfg.d) + " N=" + std::to_string(cfg.N) + " a=" + part +
                  " seed=" + std::to_string(cfg.seed);
  return ds;
}

/// Uniform x in [0,1], y = sin(6x) + jump 1{x > 0.5} + noise; regime 1 right of the jump.
inline Dataset gen_jump1d(Eigen::Index n, double noise_sd, std::uint64_t seed, double jump = 4.0) {
  if (n < 1) throw ArgumentError("gen_jump1d: n must be positive");
  if (noise_sd < 0.0) throw ArgumentError("gen_jump1d: noise_sd must be non-negative");
  SeededRng root(seed);
  auto xr = root.split(0), nr = root.split(1);
  Dataset ds;
  ds.X = uniform_design(n, 1, xr);
  ds.y.resize(n);
  VectorXd truth(n);
  std::vector<int> regime(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    truth(i) = jump1d(ds.X(i, 0), jump);
    regime[static_cast<std::size_t>(i)] = ds.X(i, 0) > 0.5 ? 1 : 0;
    ds.y(i) = truth(i) + (noise_sd > 0.0 ? noise_sd * nr.normal() : 0.0);
  }
  ds.truth = truth;
  ds.regime = regime;
  ds.input_names = {"x1"};
  ds.provenance = "jump1d n=" + std::to_string(n) + " seed=" + std::to_string(seed);
  return ds;
}

struct Jump2dConfig {
  double scale = 3.0 * std::numbers::pi;
  double phase = 0.0;
  double mean0 = 0.2;  // outside the sine region
  double mean1 = 0.8;  // where sin(scale x1 + phase) > x2
  double sd = 0.05;
  bool grid = true;  // square grid when n is a perfect square, uniform otherwise
};

inline int jump2d_regime(double x1, double x2, const Jump2dConfig& cfg = {}) {
  return std::sin(cfg.scale * x1 + cfg.phase) > x2 ? 1 : 0;
}

/// Two-regime response on [0,1]^2 split by a sinusoidal boundary; y ~ N(mean_r, sd^2).
inline Dataset gen_jump2d_sine(Eigen::Index n, std::uint64_t seed, const Jump2dConfig& cfg = {}) {
  if (n < 1) throw ArgumentError("gen_jump2d_sine: n must be positive");
  SeededRng root(seed);
  auto xr = root.split(0), nr = root.split(1);
  Dataset ds;
  const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (cfg.grid && side * side == n && side > 1) {
    ds.X.resize(n, 2);
    for (Eigen::Index i = 0; i < side; ++i)
      for (Eigen::Index j = 0; j < side; ++j) {
        ds.X(i * side + j, 0) = static_cast<double>(i) / static_cast<double>(side - 1);
        ds.X(i * side + j, 1) = static_cast<double>(j) / static_cast<double>(side - 1);
      }
  } else {
    ds.X = uniform_design(n, 2, xr);
  }
  ds.y.resize(n);
  VectorXd truth(n);
  std::vector<int> regime(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = jump2d_regime(ds.X(i, 0), ds.X(i, 1), cfg);
    regime[static_cast<std::size_t>(i)] = r;
    truth(i) = r == 1 ? cfg.mean1 : cfg.mean0;
    ds.y(i) = truth(i) + cfg.sd * nr.normal();
  }
  ds.truth = truth;
  ds.regime = regime;
  ds.input_names = {"x1", "x2"};
  ds.provenance = "jump2d_sine n=" + std::to_string(n) + " seed=" + std::to_string(seed);
  return ds;
}

}  // namespace gbc::bench
