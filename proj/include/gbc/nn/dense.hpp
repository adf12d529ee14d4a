#pragma once

#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"

#include <cmath>
#include <string>

namespace gbc::nn {

enum class Activation { identity, relu, sigmoid };

/// Fully connected layer: y = act(x * W^T + b), one sample per row.
template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;    // out

  DenseLayer() = default;
  DenseLayer(Eigen::Index in, Eigen::Index out)
      : weight(Matrix<Scalar>::Zero(out, in)), bias(Vector<Scalar>::Zero(out)) {}

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  bool finite() const { return weight.allFinite() && bias.allFinite(); }

  template <typename Other>
  DenseLayer<Other> cast() const {
    DenseLayer<Other> out;
    out.weight = weight.template cast<Other>();
    out.bias = bias.template cast<Other>();
    return out;
  }
};

template <typename Scalar>
struct DenseGrad {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;

  DenseGrad() = default;
  explicit DenseGrad(const DenseLayer<Scalar>& layer)
      : weight(Matrix<Scalar>::Zero(layer.weight.rows(), layer.weight.cols())),
        bias(Vector<Scalar>::Zero(layer.bias.size())) {}

  void set_zero() {
    weight.setZero();
    bias.setZero();
  }
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias.
template <typename Scalar>
DenseLayer<Scalar> glorot_layer(Eigen::Index in, Eigen::Index out, SeededRng& rng,
                                double gain = 1.0) {
  DenseLayer<Scalar> layer(in, out);
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c)
      layer.weight(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
  return layer;
}

template <typename Scalar, typename Derived>
void apply_activation(Eigen::MatrixBase<Derived>& z, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      z = z.cwiseMax(Scalar(0));
      break;
    case Activation::sigmoid:
      z = z.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
      break;
  }
}

/// Writes act(input * W^T + b) into `out` (resized as needed).
template <typename Scalar>
void dense_forward_into(const DenseLayer<Scalar>& layer, const Matrix<Scalar>& input,
                        Activation act, Matrix<Scalar>& out) {
  if (input.cols() != layer.in_dim())
    throw ShapeError("dense_forward: input width " + std::to_string(input.cols()) +
                     " != layer in-dimension " + std::to_string(layer.in_dim()));
  out.resize(input.rows(), layer.out_dim());
  out.noalias() = input * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  apply_activation<Scalar>(out, act);
}

template <typename Scalar>
Matrix<Scalar> dense_forward(const DenseLayer<Scalar>& layer, const Matrix<Scalar>& input,
                             Activation act) {
  Matrix<Scalar> out;
  dense_forward_into(layer, input, act, out);
  return out;
}

/// Turns d(loss)/d(output) into d(loss)/d(pre-activation), in place.
///
/// `output` is the post-activation value recorded by the forward pass. The
/// ReLU subgradient at exactly zero is zero.
template <typename Scalar>
void activation_backward(const Matrix<Scalar>& output, Activation act, Matrix<Scalar>& grad) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      grad = (output.array() > Scalar(0)).select(grad, Scalar(0));
      break;
    case Activation::sigmoid:
      grad.array() *= output.array() * (Scalar(1) - output.array());
      break;
  }
}

/// Backward through one layer given d(loss)/d(pre-activation).
/// Accumulates parameter gradients into `grad`; returns d(loss)/d(input)
/// when `grad_input` is non-null.
template <typename Scalar>
void dense_backward(const DenseLayer<Scalar>& layer, const Matrix<Scalar>& input,
                    const Matrix<Scalar>& grad_pre, DenseGrad<Scalar>& grad,
                    Matrix<Scalar>* grad_input) {
  grad.weight.noalias() += grad_pre.transpose() * input;
  grad.bias.noalias() += grad_pre.colwise().sum().transpose();
  if (grad_input != nullptr) {
    grad_input->resize(grad_pre.rows(), layer.in_dim());
    grad_input->noalias() = grad_pre * layer.weight;
  }
}

}  // namespace gbc::nn
