#pragma once

#include "gbc/core/types.hpp"
#include "gbc/nn/dense.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace gbc::nn {

/// A named, contiguous parameter block paired with its gradient buffer.
template <typename Scalar>
struct ParamBlock {
  std::string name;
  Scalar* value;
  const Scalar* grad;
  Eigen::Index size;
};

template <typename Scalar>
void append_blocks(std::vector<ParamBlock<Scalar>>& blocks, const std::string& name,
                   DenseLayer<Scalar>& layer, const DenseGrad<Scalar>& grad) {
  blocks.push_back({name + ".weight", layer.weight.data(), grad.weight.data(), layer.weight.size()});
  blocks.push_back({name + ".bias", layer.bias.data(), grad.bias.data(), layer.bias.size()});
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Vector<Scalar>> first_moment;
  std::vector<Vector<Scalar>> second_moment;
  long step_count = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(const std::vector<ParamBlock<Scalar>>& blocks, AdamHyper h = {}) : hyper(h) {
    for (const auto& b : blocks) {
      first_moment.push_back(Vector<Scalar>::Zero(b.size));
      second_moment.push_back(Vector<Scalar>::Zero(b.size));
    }
  }
};

/// One bias-corrected Adam update over every block.
///
/// Non-finite gradients abort before any parameter is touched.
template <typename Scalar>
void adam_step(const std::vector<ParamBlock<Scalar>>& blocks, AdamState<Scalar>& state, double lr) {
  if (!(lr > 0.0)) throw ArgumentError("adam_step: learning rate must be positive");
  if (state.first_moment.size() != blocks.size())
    throw ShapeError("adam_step: optimizer state does not match parameter blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (state.first_moment[i].size() != blocks[i].size)
      throw ShapeError("adam_step: moment size mismatch for " + blocks[i].name);
    Eigen::Map<const Vector<Scalar>> g(blocks[i].grad, blocks[i].size);
    if (!g.allFinite()) throw OptimizerError("adam_step: non-finite gradient in " + blocks[i].name);
  }

  ++state.step_count;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const auto b1 = static_cast<Scalar>(h.beta1);
  const auto b2 = static_cast<Scalar>(h.beta2);
  const auto step = static_cast<Scalar>(lr / (1.0 - std::pow(h.beta1, t)));
  const auto corr2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(h.beta2, t)));
  const auto eps = static_cast<Scalar>(h.eps);

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Eigen::Map<Vector<Scalar>> p(blocks[i].value, blocks[i].size);
    Eigen::Map<const Vector<Scalar>> g(blocks[i].grad, blocks[i].size);
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    p.array() -= step * m.array() / ((v.array() * corr2).sqrt() + eps);
  }
}

/// Cosine-annealed learning rate from lr0 (epoch 0) down to lr_min (epoch total).
struct CosineSchedule {
  double lr0 = 1e-3;
  double lr_min = 0.0;
  int total_epochs = 1;
};

inline double cosine_lr(const CosineSchedule& s, int epoch) {
  if (s.total_epochs <= 0) throw ArgumentError("cosine_lr: total_epochs must be positive");
  if (epoch < 0 || epoch > s.total_epochs)
    throw DomainError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(s.total_epochs) + "]");
  const double frac = static_cast<double>(epoch) / s.total_epochs;
  return s.lr_min + 0.5 * (s.lr0 - s.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace gbc::nn
