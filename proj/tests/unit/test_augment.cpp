#include "gbc/augment/classifier.hpp"
#include "gbc/augment/dip.hpp"
#include "gbc/augment/em.hpp"
#include "gbc/augment/gbc_aug.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gbc::augment {
namespace {

using M = Matrix<double>;
using V = Vector<double>;

double label_accuracy_up_to_swap(const std::vector<int>& a, const std::vector<int>& b) {
  const double acc = accuracy(a, b);
  return std::max(acc, 1.0 - acc);
}

TEST(Em, SeparatedMixtureRecoversLabels) {
  for (int seed = 0; seed < 20; ++seed) {
    SeededRng rng(1000 + seed);
    V y(500);
    std::vector<int> truth(500);
    for (int i = 0; i < 500; ++i) {
      truth[i] = rng.uniform() < 0.5 ? 1 : 0;
      y(i) = rng.normal(truth[i] ? 10.0 : 0.0, 0.1);
    }
    const auto fit = em_fit_1d(y, SeededRng(seed));
    EXPECT_GE(label_accuracy_up_to_swap(fit.hard_labels, truth), 0.99);
    EXPECT_LT(fit.mu0, fit.mu1);
    EXPECT_NEAR(fit.pi0 + fit.pi1, 1.0, 1e-12);
    EXPECT_TRUE(fit.converged);
  }
}

TEST(Em, ConstantIsDegenerate) {
  EXPECT_THROW(em_fit_1d(V(V::Constant(50, 3.0)), SeededRng(1)), DegenerateFit);
}

TEST(Em, TooFewPoints) {
  EXPECT_THROW(em_fit_1d(V(V::Ones(3)), SeededRng(1)), ArgumentError);
}

TEST(Em, SingleGaussianStillConverges) {
  SeededRng rng(3);
  V y(400);
  for (int i = 0; i < 400; ++i) y(i) = rng.normal();
  const auto fit = em_fit_1d(y, SeededRng(2));
  EXPECT_TRUE(fit.converged);
  int ones = 0;
  for (int c : fit.hard_labels) ones += c;
  EXPECT_GT(ones, 0);
  EXPECT_LT(ones, 400);
  for (int i = 0; i < 400; ++i) EXPECT_NEAR(fit.responsibilities.row(i).sum(), 1.0, 1e-12);
}

TEST(Em, LabelsAreArgmaxResponsibility) {
  SeededRng rng(4);
  V y(300);
  for (int i = 0; i < 300; ++i) y(i) = i % 3 == 0 ? rng.normal(5, 1) : rng.normal(0, 1);
  const auto fit = em_fit_1d(y, SeededRng(4));
  for (int i = 0; i < 300; ++i)
    EXPECT_EQ(fit.hard_labels[i], fit.responsibilities(i, 1) > fit.responsibilities(i, 0) ? 1 : 0);
  EXPECT_NEAR(fit.mu1, 5.0, 0.4);
  EXPECT_NEAR(fit.pi1, 1.0 / 3.0, 0.06);
}

TEST(Em, Deterministic) {
  SeededRng rng(5);
  V y(100);
  for (int i = 0; i < 100; ++i) y(i) = rng.normal(i % 2 * 4.0, 1.0);
  const auto a = em_fit_1d(y, SeededRng(7));
  const auto b = em_fit_1d(y, SeededRng(7));
  EXPECT_EQ(a.mu0, b.mu0);
  EXPECT_EQ(a.hard_labels, b.hard_labels);
}

TEST(Classifier, GradientMatchesFiniteDifferences) {
  for (int instance = 0; instance < 20; ++instance) {
    SeededRng rng(500 + instance);
    const int d = 1 + instance % 3;
    ClassifierConfig cfg;
    cfg.hidden = {8, 6, 5};
    auto net = make_classifier_net<double>(d, cfg, rng);
    for (auto& l : net.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.3, 0.3);
    const int n = 7;
    M x(n, d);
    V lab(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = rng.uniform();
      lab(i) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    nn::Mlp<double>::Tape tape;
    const M z = net.forward(x, &tape);
    M dz;
    bce_loss_grad(z, lab, dz);
    auto grads = net.make_grads();
    net.backward(tape, dz, grads);
    std::vector<nn::ParamBlock<double>> blocks;
    for (std::size_t k = 0; k < net.layers.size(); ++k)
      nn::append_blocks(blocks, "l" + std::to_string(k), net.layers[k], grads[k]);
    auto loss = [&] {
      M unused;
      return bce_loss_grad(M(net.forward(x)), lab, unused);
    };
    EXPECT_LT(testing::max_relative_gradient_error(blocks, loss), 1e-4) << "instance " << instance;
  }
}

TEST(Classifier, BceMatchesDefinition) {
  for (double z : {-8.0, -2.0, 0.0, 0.7, 6.0})
    for (double c : {0.0, 1.0}) {
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double direct = -(c * std::log(p) + (1 - c) * std::log1p(-p));
      if (std::isfinite(direct)) EXPECT_NEAR(bce_with_logit(z, c), direct, 1e-9 * (1 + direct));
    }
}

TEST(Classifier, SeparableBlobs) {
  SeededRng rng(6);
  const int n = 400;
  M X(n, 2);
  std::vector<int> lab(n);
  for (int i = 0; i < n; ++i) {
    lab[i] = i % 2;
    X(i, 0) = rng.normal(lab[i] ? 2.0 : -2.0, 0.5);
    X(i, 1) = rng.normal(lab[i] ? 1.0 : -1.0, 0.5);
  }
  ClassifierConfig cfg;
  cfg.epochs = 200;
  const auto clf = train_classifier<float>(X, lab, cfg, SeededRng(1));
  EXPECT_GE(clf.train_accuracy, 0.99);
  const V p = clf.predict_proba(X);
  EXPECT_TRUE((p.array() > 0.0).all() && (p.array() < 1.0).all());
}

TEST(Classifier, ChanceLevelOnIndependentLabels) {
  SeededRng rng(7);
  const int n = 1000;
  M X(n, 2), Xt(n, 2);
  std::vector<int> lab(n), lab_t(n);
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = rng.uniform();
    Xt(i, 0) = rng.uniform();
    Xt(i, 1) = rng.uniform();
    lab[i] = rng.uniform() < 0.7 ? 1 : 0;
    lab_t[i] = rng.uniform() < 0.7 ? 1 : 0;
    ones += lab[i];
  }
  ClassifierConfig cfg;
  cfg.epochs = 100;
  const auto clf = train_classifier<float>(X, lab, cfg, SeededRng(2));
  const double freq = std::max(ones, n - ones) / static_cast<double>(n);
  EXPECT_NEAR(accuracy(clf.predict(Xt), lab_t), freq, 0.05);
}

TEST(Classifier, SingleClassRejected) {
  M X(M::Random(10, 2));
  EXPECT_THROW(train_classifier<float>(X, std::vector<int>(10, 1), ClassifierConfig{}, SeededRng(1)), ArgumentError);
}

TEST(Augment, IdentityPassesThrough) {
  FeatureTransform<float> T;
  V x(2);
  x << 0.2, 0.7;
  EXPECT_EQ(augment(T, x), x);
  EXPECT_EQ(T.output_dim(2), 2);
}

TEST(Augment, ClassifierAppendsProbability) {
  SeededRng rng(8);
  const int n = 300;
  M X(n, 2);
  std::vector<int> lab(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = rng.uniform();
    lab[i] = X(i, 0) > 0.5 ? 1 : 0;
  }
  ClassifierConfig cfg;
  cfg.epochs = 300;
  FeatureTransform<float> T;
  T.kind = TransformKind::classifier_augment;
  T.classifier = std::make_shared<BoundaryClassifier<float>>(train_classifier<float>(X, lab, cfg, SeededRng(3)));
  const M Z = augment(T, X);
  ASSERT_EQ(Z.cols(), 3);
  EXPECT_EQ(T.output_dim(2), 3);
  EXPECT_EQ(Z.leftCols(2), X);
  V inner(2);
  inner << 0.95, 0.5;
  EXPECT_GT(augment(T, inner)(2), 0.9);
  inner << 0.05, 0.5;
  EXPECT_LT(augment(T, inner)(2), 0.1);
}

TEST(Dip, MatchesReferenceValues) {
  EXPECT_NEAR(dip_statistic(std::vector<double>{0, 1, 2, 3, 10, 11, 12, 13}), 0.175, 1e-12);
  EXPECT_NEAR(dip_statistic(std::vector<double>{0.1, 0.4, 0.45, 0.5, 0.52, 0.9, 3.0, 3.1, 3.15, 3.2, 3.9}),
              0.1660079051383399, 1e-12);
  EXPECT_NEAR(dip_statistic(std::vector<double>{9, 1, 1.5, 8.6, 1.7, 5, 8.5}), 0.18761904761904763, 1e-12);
  EXPECT_EQ(dip_statistic(std::vector<double>{2, 2, 2}), 0.0);
}

TEST(Dip, BimodalDetectedUnimodalNot) {
  SeededRng rng(9);
  V uni(500), bi(500);
  for (int i = 0; i < 500; ++i) {
    uni(i) = rng.normal();
    bi(i) = i % 2 ? rng.normal(0.2, 0.05) : rng.normal(0.8, 0.05);
  }
  EXPECT_GE(dip_test(uni, 200, SeededRng(1)).p_value, 0.05);
  EXPECT_LT(dip_test(bi, 200, SeededRng(1)).p_value, 0.05);

  const auto c = select_loss_weights(bi, std::nullopt, SeededRng(2), 200);
  EXPECT_TRUE(c.bimodal);
  EXPECT_EQ(c.weights, iqn::LossWeights::quantile_dominant());
  EXPECT_EQ(select_loss_weights(uni, std::nullopt, SeededRng(2), 200).weights, iqn::LossWeights::standard());
  const auto o = select_loss_weights(bi, iqn::LossWeights{0.5, 0.25, 0.25}, SeededRng(2));
  EXPECT_TRUE(o.overridden);
  EXPECT_EQ(o.weights, (iqn::LossWeights{0.5, 0.25, 0.25}));
}

TEST(GbcAug, PipelineOnSmoothDataRuns) {
  SeededRng rng(10);
  Dataset ds;
  ds.X.resize(120, 1);
  ds.y.resize(120);
  for (int i = 0; i < 120; ++i) {
    ds.X(i, 0) = rng.uniform();
    ds.y(i) = std::sin(3 * ds.X(i, 0)) + 0.1 * rng.normal();
  }
  iqn::IqnConfig cfg;
  cfg.epochs = 20;
  cfg.hidden_width = 16;
  GbcAugOptions opt;
  opt.classifier.epochs = 20;
  GbcAugDiagnostics diag;
  const auto m = gbc_aug_train<float>(ds, cfg, opt, SeededRng(1), &diag);
  EXPECT_EQ(m.model.config.input_dim, 2);
  MatrixXd X(3, 1);
  X << 0.1, 0.5, 0.9;
  const MatrixXd h = m.heads(X, VectorXd::Constant(3, 0.5));
  EXPECT_TRUE(h.allFinite());
}

}  // namespace
}  // namespace gbc::augment
