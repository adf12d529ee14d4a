#pragma once

#include "gbc/core/dataset.hpp"
#include "gbc/core/rng.hpp"
#include "gbc/nn/adam.hpp"
#include "gbc/nn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gbc::augment {

struct ClassifierConfig {
  std::vector<Eigen::Index> hidden = {64, 64, 64};
  int epochs = 2000;
  double lr0 = 1e-3;
  double lr_min = 0.0;
  int batch_size = 128;
  int full_batch_below = 256;

  void validate() const {
    if (hidden.empty()) throw ArgumentError("ClassifierConfig: need at least one hidden layer");
    for (auto w : hidden)
      if (w < 1) throw ArgumentError("ClassifierConfig: hidden widths must be positive");
    if (epochs < 1 || batch_size < 1) throw ArgumentError("ClassifierConfig: epochs and batch size must be positive");
    if (!(lr0 > 0.0) || lr_min < 0.0 || lr_min > lr0) throw ArgumentError("ClassifierConfig: bad learning rates");
  }
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Binary cross-entropy computed from the logit z.
inline double bce_with_logit(double z, double label) {
  return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
}

/// ReLU MLP d -> hidden... -> 1; P(c = 1 | x) = sigmoid(last layer).
/// The network emits the logit; the sigmoid is applied on prediction.
template <typename Scalar = float>
struct BoundaryClassifier {
  nn::Mlp<Scalar> net;
  Standardizer scaler;
  ClassifierConfig config;
  double train_accuracy = 0.0;

  VectorXd logits(const MatrixXd& X) const {
    const Matrix<Scalar> out = net.forward(scaler.template transform_x<Scalar>(X));
    return out.col(0).template cast<double>();
  }

  VectorXd predict_proba(const MatrixXd& X) const {
    VectorXd z = logits(X);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
    return z;
  }

  std::vector<int> predict(const MatrixXd& X) const {
    const VectorXd p = predict_proba(X);
    std::vector<int> c(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) c[static_cast<std::size_t>(i)] = p(i) > 0.5 ? 1 : 0;
    return c;
  }
};

template <typename Scalar>
nn::Mlp<Scalar> make_classifier_net(Eigen::Index d, const ClassifierConfig& cfg, SeededRng& rng) {
  std::vector<Eigen::Index> widths{d};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  return nn::make_mlp<Scalar>(widths, nn::Activation::relu, nn::Activation::identity, rng);
}

/// Mean BCE of logits `z` (n x 1) against labels; writes d(loss)/dz.
template <typename Scalar>
double bce_loss_grad(const Matrix<Scalar>& z, const Vector<Scalar>& labels, Matrix<Scalar>& dz) {
  const auto n = z.rows();
  dz.resize(n, 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = z(i, 0), c = labels(i);
    total += bce_with_logit(zi, c);
    dz(i, 0) = static_cast<Scalar>((sigmoid(zi) - c) / static_cast<double>(n));
  }
  return total / static_cast<double>(n);
}

inline double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("accuracy: label vectors differ in length");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

template <typename Scalar = float>
BoundaryClassifier<Scalar> train_classifier(const MatrixXd& X, const std::vector<int>& labels,
                                            const ClassifierConfig& cfg, const SeededRng& rng) {
  cfg.validate();
  const Eigen::Index n = X.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("train_classifier: X and labels differ in length");
  if (n < 2) throw ArgumentError("train_classifier: need at least 2 rows");
  bool has0 = false, has1 = false;
  for (int c : labels) {
    if (c != 0 && c != 1) throw ArgumentError("train_classifier: labels must be 0 or 1");
    (c ? has1 : has0) = true;
  }
  if (!(has0 && has1)) throw ArgumentError("train_classifier: labels contain a single class");

  BoundaryClassifier<Scalar> clf;
  clf.config = cfg;
  clf.scaler = Standardizer::fit(X, VectorXd::Zero(n));
  auto init_rng = rng.split(0);
  clf.net = make_classifier_net<Scalar>(X.cols(), cfg, init_rng);

  const Matrix<Scalar> Xn = clf.scaler.template transform_x<Scalar>(X);
  Vector<Scalar> yl(n);
  for (Eigen::Index i = 0; i < n; ++i) yl(i) = static_cast<Scalar>(labels[static_cast<std::size_t>(i)]);

  auto grads = clf.net.make_grads();
  std::vector<nn::ParamBlock<Scalar>> blocks;
  for (std::size_t k = 0; k < clf.net.layers.size(); ++k)
    nn::append_blocks(blocks, "layer" + std::to_string(k), clf.net.layers[k], grads[k]);
  nn::AdamState<Scalar> adam(blocks);
  const nn::CosineSchedule schedule{cfg.lr0, cfg.lr_min, cfg.epochs};
  const Eigen::Index batch = n < cfg.full_batch_below ? n : std::min<Eigen::Index>(cfg.batch_size, n);

  auto loop_rng = rng.split(1);
  typename nn::Mlp<Scalar>::Tape tape;
  Matrix<Scalar> xb, dz;
  Vector<Scalar> yb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::cosine_lr(schedule, epoch);
    const auto order = loop_rng.permutation(static_cast<std::size_t>(n));
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index m = std::min(batch, n - start);
      xb.resize(m, X.cols());
      yb.resize(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + r)]);
        xb.row(r) = Xn.row(src);
        yb(r) = yl(src);
      }
      const Matrix<Scalar> z = clf.net.forward(xb, &tape);
      const double loss = bce_loss_grad(z, yb, dz);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch, "classifier loss is not finite");
      for (auto& g : grads) g.set_zero();
      clf.net.backward(tape, dz, grads);
      try {
        nn::adam_step(blocks, adam, lr);
      } catch (const OptimizerError& e) {
        throw TrainingDiverged(epoch, e.what());
      }
    }
  }
  clf.train_accuracy = accuracy(clf.predict(X), labels);
  return clf;
}

}  // namespace gbc::augment
