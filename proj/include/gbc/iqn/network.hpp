#pragma once

#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"
#include "gbc/nn/adam.hpp"
#include "gbc/nn/dense.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace gbc::iqn {

/// phi(tau)_j = cos(j * pi * tau), j = 0 .. n_h - 1.
inline VectorXd cosine_embed(double tau, int n_h) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw DomainError("cosine_embed: tau = " + std::to_string(tau) + " outside [0, 1]");
  if (n_h <= 0) throw ArgumentError("cosine_embed: n_h must be positive");
  VectorXd phi(n_h);
  for (int j = 0; j < n_h; ++j) phi(j) = std::cos(j * std::numbers::pi * tau);
  return phi;
}

/// Row-wise embedding of a batch of levels into `out` (batch x n_h).
template <typename Scalar>
void cosine_embed_batch(const Vector<Scalar>& taus, int n_h, Matrix<Scalar>& out) {
  out.resize(taus.size(), n_h);
  for (Eigen::Index i = 0; i < taus.size(); ++i) {
    const double t = static_cast<double>(taus(i));
    if (!(t >= 0.0 && t <= 1.0))
      throw DomainError("cosine_embed: tau = " + std::to_string(t) + " outside [0, 1]");
    // cos(j a) by the Chebyshev recurrence cos(j a) = 2 cos(a) cos((j-1) a) - cos((j-2) a).
    const double c1 = std::cos(std::numbers::pi * t);
    double prev = 1.0, cur = c1;
    out(i, 0) = Scalar(1);
    if (n_h > 1) out(i, 1) = static_cast<Scalar>(c1);
    for (int j = 2; j < n_h; ++j) {
      const double next = 2.0 * c1 * cur - prev;
      prev = cur;
      cur = next;
      out(i, j) = static_cast<Scalar>(cur);
    }
  }
}

/// The four sub-networks of the implicit quantile network.
///
///   out = f_out( f_1( f_x(x) * f_tau(phi(tau)) ) )
///
/// f_x, f_tau and f_1 use ReLU; f_out is linear with two heads: column 0 is
/// the location estimate mu, column 1 the quantile estimate q_tau.
template <typename Scalar>
struct IqnNetwork {
  nn::DenseLayer<Scalar> f_x;
  nn::DenseLayer<Scalar> f_tau;
  nn::DenseLayer<Scalar> f_1;
  nn::DenseLayer<Scalar> f_out;

  Eigen::Index input_dim() const { return f_x.in_dim(); }
  Eigen::Index width() const { return f_x.out_dim(); }
  int embed_dim() const { return static_cast<int>(f_tau.in_dim()); }

  static IqnNetwork init(Eigen::Index input_dim, Eigen::Index width, int embed_dim, SeededRng& rng,
                         double gain = 1.0) {
    IqnNetwork net;
    net.f_x = nn::glorot_layer<Scalar>(input_dim, width, rng, gain);
    net.f_tau = nn::glorot_layer<Scalar>(embed_dim, width, rng, gain);
    net.f_1 = nn::glorot_layer<Scalar>(width, width, rng, gain);
    net.f_out = nn::glorot_layer<Scalar>(width, 2, rng, gain);
    return net;
  }

  template <typename Other>
  IqnNetwork<Other> cast() const {
    return {f_x.template cast<Other>(), f_tau.template cast<Other>(), f_1.template cast<Other>(),
            f_out.template cast<Other>()};
  }

  bool finite() const { return f_x.finite() && f_tau.finite() && f_1.finite() && f_out.finite(); }
};

/// FNV-1a over the raw bytes of every weight and bias, in layer order.
template <typename Scalar>
std::uint64_t weights_hash(const IqnNetwork<Scalar>& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const Scalar* p, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* l : {&net.f_x, &net.f_tau, &net.f_1, &net.f_out}) {
    mix(l->weight.data(), l->weight.size());
    mix(l->bias.data(), l->bias.size());
  }
  return h;
}

template <typename Scalar>
struct IqnTape {
  Matrix<Scalar> x, emb, hx, ht, merged, h1, out;
  bool recorded = false;
};

template <typename Scalar>
struct IqnGrads {
  nn::DenseGrad<Scalar> f_x, f_tau, f_1, f_out;

  IqnGrads() = default;
  explicit IqnGrads(const IqnNetwork<Scalar>& net)
      : f_x(net.f_x), f_tau(net.f_tau), f_1(net.f_1), f_out(net.f_out) {}

  void set_zero() {
    f_x.set_zero();
    f_tau.set_zero();
    f_1.set_zero();
    f_out.set_zero();
  }
};

template <typename Scalar>
std::vector<nn::ParamBlock<Scalar>> param_blocks(IqnNetwork<Scalar>& net, IqnGrads<Scalar>& g) {
  std::vector<nn::ParamBlock<Scalar>> blocks;
  nn::append_blocks(blocks, "f_x", net.f_x, g.f_x);
  nn::append_blocks(blocks, "f_tau", net.f_tau, g.f_tau);
  nn::append_blocks(blocks, "f_1", net.f_1, g.f_1);
  nn::append_blocks(blocks, "f_out", net.f_out, g.f_out);
  return blocks;
}

/// Forward pass recording every intermediate into `tape`. Returns tape.out.
template <typename Scalar>
const Matrix<Scalar>& network_forward(const IqnNetwork<Scalar>& net, const Matrix<Scalar>& x,
                                      const Vector<Scalar>& taus, IqnTape<Scalar>& tape) {
  if (x.rows() != taus.size())
    throw ShapeError("iqn_forward: " + std::to_string(x.rows()) + " inputs but " +
                     std::to_string(taus.size()) + " quantile levels");
  if (x.cols() != net.input_dim())
    throw ShapeError("iqn_forward: input width " + std::to_string(x.cols()) + " != " +
                     std::to_string(net.input_dim()));
  tape.x = x;
  cosine_embed_batch(taus, net.embed_dim(), tape.emb);
  nn::dense_forward_into(net.f_x, tape.x, nn::Activation::relu, tape.hx);
  nn::dense_forward_into(net.f_tau, tape.emb, nn::Activation::relu, tape.ht);
  tape.merged = tape.hx.cwiseProduct(tape.ht);
  nn::dense_forward_into(net.f_1, tape.merged, nn::Activation::relu, tape.h1);
  nn::dense_forward_into(net.f_out, tape.h1, nn::Activation::identity, tape.out);
  tape.recorded = true;
  return tape.out;
}

/// Gradient of a loss with d(loss)/d(out) = `dout` (batch x 2), accumulated into `g`.
template <typename Scalar>
void network_backward(const IqnNetwork<Scalar>& net, const IqnTape<Scalar>& tape,
                      const Matrix<Scalar>& dout, IqnGrads<Scalar>& g) {
  if (!tape.recorded) throw StateError("iqn backward called before forward");
  if (dout.rows() != tape.out.rows() || dout.cols() != 2)
    throw ShapeError("iqn backward: output gradient has wrong shape");
  Matrix<Scalar> dh1, dmerged, dhx, dht;
  nn::dense_backward(net.f_out, tape.h1, dout, g.f_out, &dh1);
  nn::activation_backward(tape.h1, nn::Activation::relu, dh1);
  nn::dense_backward(net.f_1, tape.merged, dh1, g.f_1, &dmerged);
  dhx = dmerged.cwiseProduct(tape.ht);
  dht = dmerged.cwiseProduct(tape.hx);
  nn::activation_backward(tape.hx, nn::Activation::relu, dhx);
  nn::activation_backward(tape.ht, nn::Activation::relu, dht);
  nn::dense_backward<Scalar>(net.f_x, tape.x, dhx, g.f_x, nullptr);
  nn::dense_backward<Scalar>(net.f_tau, tape.emb, dht, g.f_tau, nullptr);
}

template <typename Scalar>
struct IqnHeads {
  Vector<Scalar> mu;
  Vector<Scalar> q;
};

/// Network-level forward: both heads for a batch of (x, tau) pairs.
template <typename Scalar>
IqnHeads<Scalar> iqn_forward(const IqnNetwork<Scalar>& net, const Matrix<Scalar>& x,
                             const Vector<Scalar>& taus) {
  IqnTape<Scalar> tape;
  const auto& out = network_forward(net, x, taus, tape);
  return {out.col(0), out.col(1)};
}

}  // namespace gbc::iqn
