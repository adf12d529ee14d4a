#include "gbc/core/stats.hpp"
#include "gbc/ensemble/ensemble.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gbc::ensemble {
namespace {

using M = Matrix<double>;
using V = Vector<double>;

iqn::IqnConfig small_config(int epochs, int width = 32) {
  iqn::IqnConfig c;
  c.epochs = epochs;
  c.hidden_width = width;
  return c;
}

Dataset line_data(int n, double lo, double hi, std::uint64_t seed, double noise = 0.1) {
  SeededRng rng(seed);
  Dataset ds;
  ds.X.resize(n, 1);
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.X(i, 0) = lo + (hi - lo) * (i + 0.5) / n;
    ds.y(i) = std::sin(6.0 * ds.X(i, 0)) + noise * rng.normal();
  }
  return ds;
}

TEST(RpForward, ZeroAlphaIsPlainNetwork) {
  const auto ds = line_data(40, 0, 1, 1);
  auto m = train_member<double>(ds, small_config(5, 8), 0.0, SeededRng(3));
  M x(3, 1);
  x << 0.1, 0.5, 0.9;
  V t(3);
  t << 0.2, 0.5, 0.7;
  const M a = rp_forward(m, x, t);
  const M b = iqn::detail::eval_network(m.trainable.net, x, t);
  EXPECT_EQ(a, b);
}

TEST(RpForward, ZeroedTrainableLeavesBiasPlusPrior) {
  SeededRng rng(4);
  RandomizedPriorMember<double> m;
  m.alpha = 0.5;
  m.trainable.net = iqn::IqnNetwork<double>::init(2, 8, 4, rng);
  m.prior = iqn::IqnNetwork<double>::init(2, 8, 4, rng);
  auto& g = m.trainable.net;
  for (auto* l : {&g.f_x, &g.f_tau, &g.f_1, &g.f_out}) l->weight.setZero();
  g.f_out.bias << 0.7, -0.3;
  M x(2, 2);
  x << 0.2, 0.4, 0.8, 0.1;
  V t(2);
  t << 0.3, 0.6;
  const M out = rp_forward(m, x, t);
  const M prior = iqn::detail::eval_network(m.prior, x, t);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(out(i, 0), 0.7 + 0.5 * prior(i, 0), 1e-14);
    EXPECT_NEAR(out(i, 1), -0.3 + 0.5 * prior(i, 1), 1e-14);
  }
}

TEST(RpForward, CompositeGradientMatchesFiniteDifferences) {
  for (int instance = 0; instance < 20; ++instance) {
    SeededRng rng(300 + instance);
    const int d = 1 + instance % 3;
    auto net = iqn::IqnNetwork<double>::init(d, 8, 4, rng);
    const auto prior = iqn::IqnNetwork<double>::init(d, 8, 4, rng);
    for (auto* l : {&net.f_x, &net.f_tau, &net.f_1, &net.f_out})
      for (Eigen::Index i = 0; i < l->bias.size(); ++i) l->bias(i) = rng.uniform(-0.3, 0.3);
    const int n = 6;
    M x(n, d);
    V y(n), tau(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = rng.uniform();
      y(i) = rng.normal();
      tau(i) = rng.uniform();
    }
    const double alpha = 0.5;
    const iqn::LossWeights w{0.3, 0.3, 0.4};
    iqn::IqnTape<double> tape;
    iqn::IqnGrads<double> grads(net);
    iqn::network_forward(net, x, tau, tape);
    const M heads = tape.out + alpha * iqn::detail::eval_network(prior, x, tau);
    M dout;
    iqn::three_term_loss_grad(y, heads, tau, w, dout);
    iqn::network_backward(net, tape, dout, grads);
    auto blocks = iqn::param_blocks(net, grads);
    auto loss = [&] {
      const M h = iqn::detail::eval_network(net, x, tau) + alpha * iqn::detail::eval_network(prior, x, tau);
      return iqn::three_term_loss<double>(y, h.col(0), h.col(1), tau, w);
    };
    EXPECT_LT(testing::max_relative_gradient_error(blocks, loss), 1e-4) << "instance " << instance;
  }
}

TEST(Median, Conventions) {
  V one(1);
  one << 4.2;
  EXPECT_EQ(median(one), 4.2);
  V sym(3);
  sym << 1, -1, 0;
  EXPECT_EQ(median(sym), 0.0);
  V even(4);
  even << 5, 1, 3, 2;
  EXPECT_EQ(median(even), 2.5);
}

TEST(Disagreement, FromMedians) {
  V eq = V::Constant(3, 1.7);
  EXPECT_EQ(disagreement_from_medians(eq), 0.0);
  V two(2);
  two << 0, 2;
  EXPECT_NEAR(disagreement_from_medians(two), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(disagreement_from_medians(V(V::Zero(1))), ArgumentError);
}

TEST(PredictiveVariance, Examples) {
  iqn::PredictiveSamples s;
  s.values = V::Constant(5, 3.0);
  EXPECT_EQ(predictive_variance(s), 0.0);
  s.values.resize(2);
  s.values << 0, 2;
  EXPECT_DOUBLE_EQ(predictive_variance(s), 2.0);
  s.values.resize(3);
  s.values << -1, 0, 1;
  EXPECT_DOUBLE_EQ(predictive_variance(s), 1.0);
  s.values.resize(1);
  EXPECT_THROW(predictive_variance(s), ArgumentError);
}

TEST(Ensemble, KMustBeAtLeastTwo) {
  EnsembleOptions opt;
  opt.K = 1;
  EXPECT_THROW(train_ensemble<float>(line_data(20, 0, 1, 2), small_config(2), opt), ArgumentError);
}

TEST(Ensemble, IdenticalSeedsZeroAlphaGiveIdenticalMembers) {
  EnsembleOptions opt;
  opt.K = 3;
  opt.alpha = 0.0;
  opt.member_seeds = std::vector<std::uint64_t>{5, 5, 5};
  const auto ens = train_ensemble<float>(line_data(50, 0, 1, 3), small_config(20), opt);
  EXPECT_EQ(ens.members[0].trainable.net.f_1.weight, ens.members[1].trainable.net.f_1.weight);
  EXPECT_EQ(ens.members[1].trainable.net.f_out.weight, ens.members[2].trainable.net.f_out.weight);
  V x(1);
  x << 0.5;
  SeededRng rng(1);
  EXPECT_EQ(disagreement(ens, x, 16, rng), 0.0);
}

TEST(Ensemble, DivergingMemberIsNamed) {
  auto ds = line_data(20, 0, 1, 4);
  ds.y(2) = 1e300;
  auto cfg = small_config(3);
  cfg.standardize = false;
  EnsembleOptions opt;
  opt.K = 2;
  try {
    train_ensemble<float>(ds, cfg, opt);
    FAIL() << "expected failure";
  } catch (const EnsembleError& e) {
    EXPECT_EQ(e.member, 0);
    EXPECT_NE(std::string(e.what()).find("member 0"), std::string::npos);
  }
}

TEST(Ensemble, ParallelTrainingMatchesSerial) {
  const auto ds = line_data(50, 0, 1, 5);
  EnsembleOptions opt;
  opt.K = 3;
  opt.seed = 9;
  const auto a = train_ensemble<float>(ds, small_config(10), opt);
  opt.jobs = 3;
  const auto b = train_ensemble<float>(ds, small_config(10), opt);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(weights_hash(a.members[k].trainable.net), weights_hash(b.members[k].trainable.net));
    EXPECT_EQ(weights_hash(a.members[k].prior), weights_hash(b.members[k].prior));
  }
  EXPECT_NE(weights_hash(a.members[0].prior), weights_hash(a.members[1].prior));
}

TEST(Ensemble, FrozenPriorUnchangedByTraining) {
  const auto ds = line_data(50, 0, 1, 6);
  SeededRng rng(7);
  auto prior_rng = rng.split(2);
  const auto before = iqn::IqnNetwork<float>::init(1, 32, 32, prior_rng);
  const auto m = train_member<float>(ds, small_config(50), 0.5, rng);
  EXPECT_EQ(weights_hash(before), weights_hash(m.prior));
  EXPECT_NE(weights_hash(before), weights_hash(m.trainable.net));
}

TEST(Pooled, CountsAndDeterminism) {
  const auto ds = line_data(50, 0, 1, 7);
  const auto seeds = train_seed_ensemble<float>(ds, small_config(5, 8), 5, 11);
  V x(1);
  x << 0.4;
  SeededRng r1(3), r2(3);
  const auto a = pooled_samples(seeds.members, x, 200, r1);
  const auto b = pooled_samples(seeds.members, x, 200, r2);
  EXPECT_EQ(a.size(), 1000);
  EXPECT_EQ(a.values, b.values);

  std::vector<iqn::IqnModel<float>> one{seeds.members[0]};
  SeededRng r3(4), r4(4);
  EXPECT_EQ(pooled_samples(one, x, 30, r3).values, iqn::sample_predictive(one[0], x, 30, r4).values);
}

TEST(Pooled, SingleMemberQuantilesOnGrid) {
  const auto ds = line_data(50, 0, 1, 8);
  const auto m = iqn::train<float>(ds, small_config(20, 8), SeededRng(2));
  std::vector<iqn::IqnModel<float>> one{m};
  M X(2, 1);
  X << 0.3, 0.6;
  const auto grid = iqn::quantile_grid(19);
  const M pooled = pooled_quantile_matrix(one, X, {grid[2], grid[9]}, 19);
  const M direct = iqn::quantile_matrix(m, X, grid);
  for (int i = 0; i < 2; ++i) {
    std::vector<double> row;
    for (int j = 0; j < 19; ++j) row.push_back(direct(i, j));
    std::sort(row.begin(), row.end());
    EXPECT_NEAR(pooled(i, 0), row[2], 1e-12);
    EXPECT_NEAR(pooled(i, 1), row[9], 1e-12);
  }
}

TEST(Ensemble, DenseDataMembersFitData) {
  const auto ds = line_data(200, 0, 1, 9, 0.05);
  EnsembleOptions opt;
  opt.K = 2;
  opt.seed = 3;
  const auto ens = train_ensemble<float>(ds, small_config(3000, 64), opt);
  SeededRng rng(5);
  double worst = 0.0;
  for (double x0 : {0.2, 0.5, 0.8}) {
    V x(1);
    x << x0;
    for (const auto& m : ens.members)
      worst = std::max(worst, std::abs(member_median(m, x, 64, rng) - std::sin(6.0 * x0)));
  }
  EXPECT_LT(worst, 0.15);
}

TEST(Ensemble, DisagreementHigherOutsideSupport) {
  const auto ds = line_data(200, 0.0, 0.4, 10, 0.05);
  EnsembleOptions opt;
  opt.K = 3;
  opt.seed = 21;
  const auto ens = train_ensemble<float>(ds, small_config(800, 64), opt);
  M inside(20, 1), outside(20, 1);
  for (int i = 0; i < 20; ++i) {
    inside(i, 0) = 0.4 * (i + 0.5) / 20;
    outside(i, 0) = 0.6 + 0.4 * (i + 0.5) / 20;
  }
  const V a_in = disagreement_batch(ens, inside, 64, SeededRng(1));
  const V a_out = disagreement_batch(ens, outside, 64, SeededRng(1));
  EXPECT_GE(a_out.mean(), 2.0 * a_in.mean());

  V x(1);
  x << 0.9;
  SeededRng r(2);
  const double far = disagreement(ens, x, 64, r);
  x << 0.2;
  EXPECT_GT(far, disagreement(ens, x, 64, r));
}

TEST(Ensemble, BatchDisagreementIndependentOfJobs) {
  const auto ds = line_data(40, 0, 1, 11);
  EnsembleOptions opt;
  opt.K = 3;
  const auto ens = train_ensemble<float>(ds, small_config(5, 8), opt);
  M X(7, 1);
  for (int i = 0; i < 7; ++i) X(i, 0) = i / 6.0;
  EXPECT_EQ(disagreement_batch(ens, X, 16, SeededRng(3), 1), disagreement_batch(ens, X, 16, SeededRng(3), 3));
}

}  // namespace
}  // namespace gbc::ensemble
