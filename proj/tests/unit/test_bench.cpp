#include "gbc/augment/dip.hpp"
#include "gbc/bench/generators.hpp"
#include "gbc/bench/lhs.hpp"
#include "gbc/bench/split.hpp"
#include "gbc/gp/gp.hpp"
#include "gbc/io/csv.hpp"
#include "gbc/iqn/model.hpp"
#include "gbc/iqn/predict.hpp"
#include "gbc/metrics/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

namespace gbc::bench {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("gbc_test_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

TEST(Friedman, ForcedTerms) {
  EXPECT_DOUBLE_EQ(friedman(VectorXd::Zero(10)), 5.0);
  const double half = 10.0 * std::sin(std::numbers::pi / 4.0) + 5.0 + 2.5;
  EXPECT_NEAR(friedman(VectorXd::Constant(10, 0.5)), half, 1e-12);
  EXPECT_NEAR(half, 14.5711, 1e-4);
}

TEST(Friedman, InertDimensions) {
  SeededRng rng(1);
  for (int t = 0; t < 50; ++t) {
    VectorXd x(10);
    for (int j = 0; j < 10; ++j) x(j) = rng.uniform();
    VectorXd x2 = x;
    x2(6) = rng.uniform();
    x2(9) = rng.uniform();
    EXPECT_EQ(friedman(x), friedman(x2));
  }
}

TEST(Friedman, OutsideCubeIsDomainError) {
  VectorXd x = VectorXd::Constant(10, 0.5);
  x(3) = 1.2;
  EXPECT_THROW(friedman(x), DomainError);
  EXPECT_THROW(friedman(VectorXd::Zero(9)), ShapeError);
}

TEST(Friedman, GeneratorNoiseAndSeeds) {
  const auto a = gen_friedman(200, 0.0, 3);
  EXPECT_EQ(a.y, *a.truth);
  const auto b = gen_friedman(200, 1.0, 3), c = gen_friedman(200, 1.0, 3), e = gen_friedman(200, 1.0, 4);
  EXPECT_EQ(b.X, c.X);
  EXPECT_EQ(b.y, c.y);
  EXPECT_NE(b.y, e.y);
  EXPECT_EQ(b.X, a.X);
  const VectorXd noise = b.y - *b.truth;
  EXPECT_NEAR(noise.mean(), 0.0, 0.25);
  EXPECT_NEAR(std::sqrt(noise.squaredNorm() / 200.0), 1.0, 0.15);
  EXPECT_EQ(gen_friedman(2000, 1.0, 1).size(), 2000);
}

TEST(Bgp, RegimeLabelsFollowPartition) {
  BgpConfig cfg;
  cfg.d = 3;
  cfg.N = 300;
  cfg.seed = 5;
  cfg.partition = std::vector<int>{1, -1, 1};
  const auto ds = gen_bgp(cfg);
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const double s = ds.X(i, 0) - ds.X(i, 1) + ds.X(i, 2);
    EXPECT_EQ((*ds.regime)[static_cast<std::size_t>(i)], s >= 0.0 ? 1 : 0);
    EXPECT_GE(ds.X.row(i).minCoeff(), -0.5);
    EXPECT_LE(ds.X.row(i).maxCoeff(), 0.5);
  }
  EXPECT_DOUBLE_EQ(cfg.se_length(), 0.3);
}

TEST(Bgp, RegimeMeanGapOverSeeds) {
  double gap = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    BgpConfig cfg;
    cfg.N = 500;
    cfg.seed = static_cast<std::uint64_t>(100 + s);
    const auto ds = gen_bgp(cfg);
    double m1 = 0, m0 = 0;
    int n1 = 0, n0 = 0;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      if ((*ds.regime)[static_cast<std::size_t>(i)] == 1)
        m1 += ds.y(i), ++n1;
      else
        m0 += ds.y(i), ++n0;
    }
    gap += m0 / n0 - m1 / n1;
  }
  EXPECT_NEAR(gap / seeds, 13.0, 1.5);
}

TEST(Bgp, JumpToNoiseRatioAndDeterminism) {
  BgpConfig cfg;
  EXPECT_DOUBLE_EQ((cfg.mean2 - cfg.mean1) / std::sqrt(cfg.noise_variance), 6.5);
  cfg.N = 200;
  cfg.seed = 9;
  const auto a = gen_bgp(cfg), b = gen_bgp(cfg);
  EXPECT_EQ(a.y, b.y);
  cfg.N = 5000;
  EXPECT_THROW(gen_bgp(cfg), ArgumentError);
}

TEST(Jump1d, StepAndNoise) {
  EXPECT_NEAR(jump1d(0.5 + 1e-12) - jump1d(0.5), 4.0, 1e-9);
  EXPECT_NEAR(jump1d(0.5 + 1e-12, 2.5) - jump1d(0.5, 2.5), 2.5, 1e-9);
  const auto ds = gen_jump1d(100, 0.0, 2);
  for (Eigen::Index i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.y(i), jump1d(ds.X(i, 0)));
}

TEST(Jump2d, GridRegimesAndBimodality) {
  const auto ds = gen_jump2d_sine(10201, 4);
  EXPECT_EQ(ds.size(), 10201);
  EXPECT_EQ(ds.X(0, 0), 0.0);
  EXPECT_EQ(ds.X(10200, 1), 1.0);
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    EXPECT_EQ((*ds.regime)[static_cast<std::size_t>(i)], std::sin(3.0 * std::numbers::pi * ds.X(i, 0)) > ds.X(i, 1));
  SeededRng rng(1);
  const auto t = augment::dip_test(ds.y, 200, rng);
  EXPECT_LT(t.p_value, 0.05);
  const auto u = gen_jump2d_sine(500, 4);
  EXPECT_EQ(u.size(), 500);
}

TEST(OtherFunctions, MichalewiczFlatRegion) {
  EXPECT_EQ(michalewicz_offset(VectorXd::Zero(4)), 0.5);
  VectorXd x = VectorXd::Constant(4, 0.05);
  EXPECT_NEAR(michalewicz_offset(x), 0.5, 1e-3);
  VectorXd peak(4);
  peak << 2.20 / std::numbers::pi, 1.57 / std::numbers::pi, 1.28 / std::numbers::pi, 1.92 / std::numbers::pi;
  EXPECT_LT(michalewicz_offset(peak), -2.5);
}

TEST(OtherFunctions, Exp2dZeroAtOrigin) {
  VectorXd x(2);
  x << 1.0 / 3.0, 0.7;
  EXPECT_NEAR(exp2d(x), 0.0, 1e-15);
  x << 0.4, 1.0 / 3.0;  // z = (0.4, 0)
  EXPECT_NEAR(exp2d(x), 0.4 * std::exp(-0.16), 1e-12);
}

TEST(OtherFunctions, Proxy7dSmooth) {
  SeededRng rng(3);
  const double h = 1e-6;
  for (int t = 0; t < 200; ++t) {
    VectorXd x(7);
    for (int j = 0; j < 7; ++j) x(j) = rng.uniform(0.01, 0.99);
    for (int j = 0; j < 7; ++j) {
      VectorXd a = x, b = x;
      a(j) += h;
      b(j) -= h;
      EXPECT_LT(std::abs(proxy7d(a) - proxy7d(b)) / (2 * h), 10.0);
    }
  }
  EXPECT_THROW(test_function("nope"), ArgumentError);
}

TEST(Lhs, OnePointPerStratum) {
  SeededRng rng(7);
  const auto X = lhs(25, 4, rng);
  for (Eigen::Index j = 0; j < 4; ++j) {
    std::set<long> strata;
    for (Eigen::Index i = 0; i < 25; ++i) strata.insert(static_cast<long>(std::floor(X(i, j) * 25)));
    EXPECT_EQ(strata.size(), 25u);
  }
  const auto one = lhs(1, 3, rng);
  EXPECT_TRUE((one.array() >= 0.0).all() && (one.array() < 1.0).all());
}

TEST(Lhs, MarginalsUniformOverSeeds) {
  std::vector<int> counts(10, 0);
  const int seeds = 100, n = 7;
  for (int s = 0; s < seeds; ++s) {
    SeededRng rng(static_cast<std::uint64_t>(s));
    const auto X = lhs(n, 2, rng);
    for (Eigen::Index i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(std::min(9.0, std::floor(X(i, 1) * 10)))];
  }
  const double expect = seeds * n / 10.0, sd = std::sqrt(seeds * n * 0.1 * 0.9);
  for (int c : counts) EXPECT_LT(std::abs(c - expect), 4.0 * sd);
}

TEST(Split, MotorcycleSizes) {
  Dataset ds;
  ds.X = MatrixXd::Zero(133, 1);
  ds.y = VectorXd::LinSpaced(133, 0, 132);
  SeededRng r1(11), r2(11);
  const auto a = split_indices(133, 0.8, r1), b = split_indices(133, 0.8, r2);
  EXPECT_EQ(a.train.size(), 106u);
  EXPECT_EQ(a.test.size(), 27u);
  EXPECT_EQ(a.train, b.train);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all.size(), 133u);
  SeededRng r3(11);
  const auto [tr, te] = split(ds, 0.8, r3);
  EXPECT_EQ(tr.size(), 106);
  EXPECT_EQ(te.size(), 27);
}

TEST(Split, DegenerateFractions) {
  SeededRng rng(1);
  EXPECT_THROW(split_indices(10, 0.0, rng), ArgumentError);
  EXPECT_THROW(split_indices(10, 1.0, rng), ArgumentError);
  EXPECT_THROW(split_indices(3, 0.2, rng), ArgumentError);
}

TEST(Csv, RoundTripIsBitExact) {
  auto ds = gen_bgp(BgpConfig{.d = 2, .N = 50, .seed = 3});
  ds.response_name = "resp";
  const auto path = temp_path("roundtrip.csv");
  io::save_csv(ds, path, {"generated for a round trip"});
  const auto back = io::load_csv(path, {}, "resp");
  EXPECT_EQ(back.X, ds.X);
  EXPECT_EQ(back.y, ds.y);
  EXPECT_EQ(*back.truth, *ds.truth);
  EXPECT_EQ(*back.regime, *ds.regime);
  io::save_csv(back, path);
  const auto again = io::load_csv(path, {"x2", "x1"}, "resp");
  EXPECT_EQ(again.X.col(0), ds.X.col(1));
  std::remove(path.c_str());
}

TEST(Csv, DescriptiveErrors) {
  const auto path = temp_path("bad.csv");
  write_file(path, "time_ms,accel_g\n1.0,2.0\n2.0,abc\n");
  try {
    io::load_csv(path, {"time_ms"}, "accel_g");
    FAIL();
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos);
    EXPECT_NE(msg.find("column 2"), std::string::npos);
    EXPECT_NE(msg.find("abc"), std::string::npos);
  }
  write_file(path, "time_ms,accel_g\n1.0,2.0\n");
  EXPECT_THROW(io::load_csv(path, {"times"}, "accel_g"), IngestionError);
  write_file(path, "");
  EXPECT_THROW(io::load_csv(path, {}, "accel_g"), IngestionError);
  write_file(path, "a,b\n1,2,3\n");
  EXPECT_THROW(io::load_csv(path, {}, "b"), IngestionError);
  EXPECT_THROW(io::load_csv(temp_path("does_not_exist.csv"), {}, "b"), IngestionError);
  std::remove(path.c_str());
}

// A stationary GP blurs the step; the IQN median stays sharp next to it.
TEST(Jump1d, GpBlursJumpMoreThanIqn) {
  const auto train = gen_jump1d(400, 0.3, 21);
  SeededRng rng(5);
  const auto gp = gp::gp_fit(train, gp::GpOptions{}, rng);
  iqn::IqnConfig cfg;
  cfg.epochs = iqn::default_epochs_for_size(train.size());
  const auto model = iqn::train<float>(train, cfg, SeededRng(6));
  const Eigen::Index m = 201;
  MatrixXd Xw(m, 1);
  VectorXd truth(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Xw(i, 0) = 0.45 + 0.1 * static_cast<double>(i) / static_cast<double>(m - 1);
    truth(i) = jump1d(Xw(i, 0));
  }
  const double gp_rmse = metrics::rmse(gp::gp_predict(gp, Xw).mean, truth);
  const double iqn_rmse = metrics::rmse(iqn::predict_median(model, Xw), truth);
  EXPECT_GT(gp_rmse, iqn_rmse);
}

}  // namespace
}  // namespace gbc::bench
