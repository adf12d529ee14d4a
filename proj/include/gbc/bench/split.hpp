#pragma once

#include "gbc/core/dataset.hpp"
#include "gbc/core/rng.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace gbc::bench {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded permutation; the first floor(n * train_frac) indices train.
inline SplitIndices split_indices(std::size_t n, double train_frac, SeededRng& rng) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ArgumentError("split: train fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_frac));
  if (n_train == 0 || n_train == n)
    throw ArgumentError("split: fraction leaves an empty train or test set for n = " + std::to_string(n));
  auto perm = rng.permutation(n);
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return s;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, SeededRng& rng) {
  const auto idx = split_indices(static_cast<std::size_t>(ds.size()), train_frac, rng);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

}  // namespace gbc::bench
