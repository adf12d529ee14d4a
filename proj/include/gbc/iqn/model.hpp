#pragma once

#include "gbc/core/dataset.hpp"
#include "gbc/core/rng.hpp"
#include "gbc/iqn/loss.hpp"
#include "gbc/iqn/network.hpp"
#include "gbc/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gbc::iqn {

/// How quantile levels are drawn during training.
enum class TauSampling {
  per_row,    // an independent level for every row of every mini-batch
  per_batch,  // one level shared by the whole mini-batch
};

struct IqnConfig {
  int input_dim = 1;
  int hidden_width = 256;
  int embed_dim = 32;
  int epochs = 5000;
  LossWeights loss_weights = LossWeights::standard();
  double lr0 = 1e-3;
  double lr_min = 0.0;
  /// Rows per Adam step; 0 trains full batch.
  int batch_size = 0;
  TauSampling tau_sampling = TauSampling::per_row;
  bool standardize = true;

  void validate() const {
    if (input_dim < 1 || hidden_width < 1 || embed_dim < 1)
      throw ArgumentError("IqnConfig: dimensions must be positive");
    if (epochs < 1) throw ArgumentError("IqnConfig: epochs must be positive");
    if (batch_size < 0) throw ArgumentError("IqnConfig: batch_size must be >= 0 (0: full batch)");
    if (!(lr0 > 0.0) || lr_min < 0.0 || lr_min > lr0)
      throw ArgumentError("IqnConfig: need lr0 > 0 and 0 <= lr_min <= lr0");
    loss_weights.validate();
  }
};

/// Epoch defaults by benchmark family: small designs get more passes.
enum class EpochFamily { small, large, jump2d };

inline int default_epochs(EpochFamily family) {
  switch (family) {
    case EpochFamily::small: return 5000;
    case EpochFamily::large: return 3000;
    case EpochFamily::jump2d: return 6000;
  }
  return 5000;
}

inline int default_epochs_for_size(Eigen::Index n) { return n <= 500 ? 5000 : 3000; }

/// Trained generator plus the scaling it was trained under.
template <typename Scalar>
struct IqnModel {
  IqnConfig config;
  IqnNetwork<Scalar> net;
  Standardizer scaler;
  std::vector<double> loss_history;

  /// Both heads in response units for raw inputs `X` (one row per level).
  MatrixXd heads(const MatrixXd& X, const VectorXd& taus) const;
};

/// Output added to the trainable network's heads, e.g. a frozen prior.
template <typename Scalar>
struct OutputOffset {
  const IqnNetwork<Scalar>* network = nullptr;
  Scalar scale = Scalar(0);

  bool active() const { return network != nullptr && scale != Scalar(0); }
};

namespace detail {

template <typename Scalar>
void fill_taus(Vector<Scalar>& taus, TauSampling mode, SeededRng& rng) {
  if (mode == TauSampling::per_batch) {
    taus.setConstant(static_cast<Scalar>(rng.uniform()));
  } else {
    for (Eigen::Index i = 0; i < taus.size(); ++i) taus(i) = static_cast<Scalar>(rng.uniform());
  }
}

template <typename Scalar>
Matrix<Scalar> eval_network(const IqnNetwork<Scalar>& net, const Matrix<Scalar>& x,
                            const Vector<Scalar>& taus) {
  IqnTape<Scalar> tape;
  return network_forward(net, x, taus, tape);
}

}  // namespace detail

/// Runs the training loop on an already-initialized network.
///
/// Inputs and responses must already be in the network's working units.
/// Each epoch draws fresh quantile levels and a fresh row order; the learning
/// rate follows a cosine schedule from lr0 at epoch 0. Returns the mean
/// training loss of every epoch.
template <typename Scalar>
std::vector<double> fit_network(IqnNetwork<Scalar>& net, const Matrix<Scalar>& X,
                                const Vector<Scalar>& y, const IqnConfig& config, SeededRng& rng,
                                const OutputOffset<Scalar>& offset = {}) {
  config.validate();
  const Eigen::Index n = X.rows();
  if (n < 2) throw ArgumentError("train: need at least 2 observations");
  if (y.size() != n) throw ShapeError("train: X and y lengths differ");
  if (X.cols() != net.input_dim()) throw ShapeError("train: input width does not match network");

  IqnGrads<Scalar> grads(net);
  auto blocks = param_blocks(net, grads);
  nn::AdamState<Scalar> adam(blocks);
  const nn::CosineSchedule schedule{config.lr0, config.lr_min, config.epochs};

  const Eigen::Index batch = config.batch_size == 0 ? n : std::min<Eigen::Index>(config.batch_size, n);
  const Eigen::Index d = X.cols();

  Matrix<Scalar> xb(batch, d), dout, heads;
  Vector<Scalar> yb(batch), taub(batch);
  IqnTape<Scalar> tape;

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = nn::cosine_lr(schedule, epoch);
    const auto order = rng.permutation(static_cast<std::size_t>(n));
    double epoch_loss = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index m = std::min(batch, n - start);
      xb.resize(m, d);
      yb.resize(m);
      taub.resize(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + r)]);
        xb.row(r) = X.row(src);
        yb(r) = y(src);
      }
      detail::fill_taus(taub, config.tau_sampling, rng);

      network_forward(net, xb, taub, tape);
      if (offset.active()) {
        heads = tape.out + offset.scale * detail::eval_network(*offset.network, xb, taub);
      } else {
        heads = tape.out;
      }
      const double loss = three_term_loss_grad(yb, heads, taub, config.loss_weights, dout);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch, "non-finite loss");
      grads.set_zero();
      network_backward(net, tape, dout, grads);
      try {
        nn::adam_step(blocks, adam, lr);
      } catch (const OptimizerError& e) {
        throw TrainingDiverged(epoch, e.what());
      }
      epoch_loss += loss * static_cast<double>(m);
      seen += m;
    }
    history.push_back(epoch_loss / static_cast<double>(seen));
  }
  return history;
}

/// Trains an IQN on `data` from a fresh Glorot initialization.
template <typename Scalar = float>
IqnModel<Scalar> train(const Dataset& data, IqnConfig config, const SeededRng& rng) {
  data.validate();
  if (data.size() < 2) throw ArgumentError("train: need at least 2 observations");
  if (!data.y.allFinite()) throw DomainError("train: non-finite response");
  config.input_dim = static_cast<int>(data.dim());
  config.validate();

  IqnModel<Scalar> model;
  model.config = config;
  model.scaler = config.standardize ? Standardizer::fit(data.X, data.y)
                                    : Standardizer::identity(data.dim());
  auto init_rng = rng.split(0);
  model.net = IqnNetwork<Scalar>::init(data.dim(), config.hidden_width, config.embed_dim, init_rng);

  const Matrix<Scalar> Xn = model.scaler.template transform_x<Scalar>(data.X);
  Vector<Scalar> yn(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    yn(i) = static_cast<Scalar>(model.scaler.transform_y(data.y(i)));
  auto loop_rng = rng.split(1);
  model.loss_history = fit_network(model.net, Xn, yn, config, loop_rng);
  return model;
}

/// Further trains an existing model on `data` for `epochs` passes, keeping its
/// weights and scaling.
template <typename Scalar, typename Offset = OutputOffset<Scalar>>
void continue_training(IqnModel<Scalar>& model, const Dataset& data, int epochs, SeededRng& rng,
                       const Offset& offset = {}) {
  data.validate();
  if (data.dim() != model.net.input_dim()) throw ShapeError("continue_training: input width does not match model");
  IqnConfig config = model.config;
  config.epochs = epochs;
  const Matrix<Scalar> Xn = model.scaler.template transform_x<Scalar>(data.X);
  Vector<Scalar> yn(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    yn(i) = static_cast<Scalar>(model.scaler.transform_y(data.y(i)));
  const auto h = fit_network(model.net, Xn, yn, config, rng, offset);
  model.loss_history.insert(model.loss_history.end(), h.begin(), h.end());
}

namespace detail {
inline constexpr Eigen::Index kPredictChunk = 4096;

/// Evaluates `eval(xn_chunk, tau_chunk)` (working units) in row chunks and maps
/// both heads back to response units.
template <typename Scalar, typename Eval>
MatrixXd chunked_heads(const Standardizer& scaler, const MatrixXd& X, const VectorXd& taus,
                       Eval&& eval) {
  if (X.rows() != taus.size()) throw ShapeError("heads: inputs and levels differ in length");
  MatrixXd out(X.rows(), 2);
  for (Eigen::Index start = 0; start < X.rows(); start += kPredictChunk) {
    const Eigen::Index m = std::min(kPredictChunk, X.rows() - start);
    const Matrix<Scalar> xn = scaler.template transform_x<Scalar>(X.middleRows(start, m));
    const Vector<Scalar> t = taus.segment(start, m).template cast<Scalar>();
    const Matrix<Scalar> h = eval(xn, t);
    for (Eigen::Index r = 0; r < m; ++r) {
      out(start + r, 0) = scaler.inverse_y(static_cast<double>(h(r, 0)));
      out(start + r, 1) = scaler.inverse_y(static_cast<double>(h(r, 1)));
    }
  }
  return out;
}
}  // namespace detail

template <typename Scalar>
MatrixXd IqnModel<Scalar>::heads(const MatrixXd& X, const VectorXd& taus) const {
  return detail::chunked_heads<Scalar>(scaler, X, taus, [&](const Matrix<Scalar>& xn, const Vector<Scalar>& t) {
    return detail::eval_network(net, xn, t);
  });
}

}  // namespace gbc::iqn
