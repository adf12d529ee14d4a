#pragma once

#include "gbc/nn/adam.hpp"
#include "gbc/nn/dense.hpp"

#include <string>
#include <vector>

namespace gbc::nn {

/// Sequential stack of dense layers with per-layer activations.
template <typename Scalar>
struct Mlp {
  std::vector<DenseLayer<Scalar>> layers;
  std::vector<Activation> activations;

  /// Activations recorded by a forward pass; `backward` replays them.
  struct Tape {
    std::vector<Matrix<Scalar>> values;  // values[0] = input, values[i+1] = output of layer i
    bool recorded = false;
  };

  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Tape* tape = nullptr) const {
    if (tape == nullptr) {
      Matrix<Scalar> a = x, b;
      for (std::size_t i = 0; i < layers.size(); ++i) {
        dense_forward_into(layers[i], a, activations[i], b);
        a.swap(b);
      }
      return a;
    }
    tape->values.resize(layers.size() + 1);
    tape->values[0] = x;
    for (std::size_t i = 0; i < layers.size(); ++i)
      dense_forward_into(layers[i], tape->values[i], activations[i], tape->values[i + 1]);
    tape->recorded = true;
    return tape->values.back();
  }

  /// Accumulates parameter gradients for d(loss)/d(output) = `grad_out`.
  void backward(const Tape& tape, const Matrix<Scalar>& grad_out,
                std::vector<DenseGrad<Scalar>>& grads) const {
    if (!tape.recorded) throw StateError("Mlp::backward called before forward");
    if (grads.size() != layers.size()) throw ShapeError("Mlp::backward: gradient buffer mismatch");
    Matrix<Scalar> g = grad_out, g_in;
    for (std::size_t k = layers.size(); k-- > 0;) {
      activation_backward(tape.values[k + 1], activations[k], g);
      dense_backward(layers[k], tape.values[k], g, grads[k], k > 0 ? &g_in : nullptr);
      if (k > 0) g.swap(g_in);
    }
  }

  std::vector<DenseGrad<Scalar>> make_grads() const {
    std::vector<DenseGrad<Scalar>> g;
    for (const auto& l : layers) g.emplace_back(l);
    return g;
  }

  std::vector<ParamBlock<Scalar>> blocks(std::vector<DenseGrad<Scalar>>& grads,
                                         const std::string& prefix) {
    std::vector<ParamBlock<Scalar>> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      append_blocks(out, prefix + "." + std::to_string(i), layers[i], grads[i]);
    return out;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> m;
    for (const auto& l : layers) m.layers.push_back(l.template cast<Other>());
    m.activations = activations;
    return m;
  }
};

/// Builds a Glorot-initialized MLP with the given layer widths.
/// Hidden layers use `hidden`, the last layer uses `output`.
template <typename Scalar>
Mlp<Scalar> make_mlp(const std::vector<Eigen::Index>& widths, Activation hidden, Activation output,
                     SeededRng& rng) {
  if (widths.size() < 2) throw ArgumentError("make_mlp: need at least input and output widths");
  Mlp<Scalar> m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(glorot_layer<Scalar>(widths[i], widths[i + 1], rng));
    m.activations.push_back(i + 2 == widths.size() ? output : hidden);
  }
  return m;
}

}  // namespace gbc::nn
