#pragma once

#include "gbc/augment/classifier.hpp"
#include "gbc/augment/em.hpp"
#include "gbc/core/dataset.hpp"
#include "gbc/iqn/model.hpp"

#include <memory>
#include <optional>

namespace gbc::augment {

enum class TransformKind { identity, classifier_augment };

/// z = T(x): either x itself or [x, P(c = 1 | x)].
template <typename Scalar = float>
struct FeatureTransform {
  TransformKind kind = TransformKind::identity;
  std::shared_ptr<const BoundaryClassifier<Scalar>> classifier;

  Eigen::Index output_dim(Eigen::Index d) const { return kind == TransformKind::identity ? d : d + 1; }
};

template <typename Scalar>
MatrixXd augment(const FeatureTransform<Scalar>& T, const MatrixXd& X) {
  if (T.kind == TransformKind::identity) return X;
  if (!T.classifier) throw StateError("augment: classifier transform without a classifier");
  MatrixXd Z(X.rows(), X.cols() + 1);
  Z.leftCols(X.cols()) = X;
  Z.col(X.cols()) = T.classifier->predict_proba(X);
  return Z;
}

template <typename Scalar>
VectorXd augment(const FeatureTransform<Scalar>& T, const VectorXd& x) {
  return augment(T, MatrixXd(x.transpose())).row(0).transpose();
}

/// Augment-then-forward predictor.
template <typename Scalar = float>
struct GbcAugModel {
  FeatureTransform<Scalar> transform;
  iqn::IqnModel<Scalar> model;

  MatrixXd heads(const MatrixXd& X, const VectorXd& taus) const {
    return model.heads(augment(transform, X), taus);
  }
};

struct GbcAugOptions {
  EmOptions em;
  ClassifierConfig classifier;
};

struct GbcAugDiagnostics {
  Gmm1dFit em;
  /// Agreement of the classifier's hard decision with the EM labels on the training rows.
  double classifier_accuracy = 0.0;
};

/// EM on responses -> classifier on inputs -> IQN on [x, c(x)].
/// Stages use rng streams 0, 1 and 2.
template <typename Scalar = float>
GbcAugModel<Scalar> gbc_aug_train(const Dataset& data, const iqn::IqnConfig& config, const GbcAugOptions& opt,
                                  const SeededRng& rng, GbcAugDiagnostics* diag = nullptr) {
  data.validate();
  const Gmm1dFit em = em_fit_1d(data.y, opt.em, rng.split(0));
  auto clf = std::make_shared<BoundaryClassifier<Scalar>>(
      train_classifier<Scalar>(data.X, em.hard_labels, opt.classifier, rng.split(1)));

  GbcAugModel<Scalar> out;
  out.transform.kind = TransformKind::classifier_augment;
  out.transform.classifier = clf;
  Dataset aug = data;
  aug.X = augment(out.transform, data.X);
  aug.input_names.clear();
  out.model = iqn::train<Scalar>(aug, config, rng.split(2));
  if (diag) {
    diag->em = em;
    diag->classifier_accuracy = clf->train_accuracy;
  }
  return out;
}

}  // namespace gbc::augment
