#pragma once

#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"

namespace gbc::bench {

/// Latin hypercube on [0,1]^d: each column places one point in each of the n
/// strata, in random order, jittered uniformly within the stratum.
inline MatrixXd lhs(Eigen::Index n, Eigen::Index d, SeededRng& rng) {
  if (n < 1 || d < 1) throw ArgumentError("lhs: n and d must be positive");
  MatrixXd X(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto perm = rng.permutation(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      X(i, j) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.uniform()) / static_cast<double>(n);
  }
  return X;
}

inline MatrixXd uniform_design(Eigen::Index n, Eigen::Index d, SeededRng& rng, double lo = 0.0, double hi = 1.0) {
  if (n < 1 || d < 1) throw ArgumentError("uniform_design: n and d must be positive");
  MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.uniform(lo, hi);
  return X;
}

}  // namespace gbc::bench
