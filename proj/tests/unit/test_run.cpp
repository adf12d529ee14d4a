#include "gbc/al/al.hpp"
#include "gbc/run/runner.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace gbc;
using namespace gbc::run;

namespace {

RunConfig small_run() {
  RunConfig c;
  c.benchmark = "friedman";
  c.methods = {Method::gbc, Method::gp};
  c.replicates = 2;
  c.seed = 7;
  c.n = 80;
  c.epochs = 30;
  c.deterministic = true;
  return c;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST(Runner, RowAccountingAndSummary) {
  const auto cfg = small_run();
  const auto res = run_benchmark(cfg);
  ASSERT_EQ(res.size(), 4u);
  EXPECT_EQ(res[0].method, Method::gbc);
  EXPECT_EQ(res[1].method, Method::gp);
  EXPECT_EQ(res[2].replicate, 1);
  for (const auto& r : res) EXPECT_FALSE(r.error.has_value()) << *r.error;
  const auto csv = lines(metrics_csv(res, cfg));
  ASSERT_EQ(csv.size(), 6u);
  EXPECT_EQ(csv[0].rfind("# gbc " + io::version_string() + " config=", 0), 0u);
  EXPECT_EQ(csv[1], "benchmark,method,replicate,seed,rmse,rmspe,crps,coverage90,fit_seconds");
  EXPECT_EQ(csv[2].substr(csv[2].size() - 3), ",NA");
  const auto rows = summarize(res, cfg.methods);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].ok, 2);
  EXPECT_NEAR(rows[0].crps.mean, 0.5 * (res[0].report.crps_mean + res[2].report.crps_mean), 1e-12);
}

TEST(Runner, SameSeedGivesIdenticalCsv) {
  const auto cfg = small_run();
  EXPECT_EQ(metrics_csv(run_benchmark(cfg), cfg), metrics_csv(run_benchmark(cfg), cfg));
}

TEST(Runner, AddingReplicatesKeepsEarlierOnes) {
  auto cfg = small_run();
  cfg.methods = {Method::gbc};
  cfg.replicates = 1;
  const auto one = run_benchmark(cfg);
  cfg.replicates = 3;
  const auto three = run_benchmark(cfg);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(one[0].seed, three[0].seed);
  EXPECT_EQ(one[0].report.crps_mean, three[0].report.crps_mean);
  EXPECT_NE(three[0].seed, three[1].seed);
}

TEST(Runner, UnknownNamesListValidChoices) {
  try {
    benchmark_spec("rocket");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("friedman"), std::string::npos);
  }
  try {
    parse_method("dgp");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("gbc_aug"), std::string::npos);
  }
  RunConfig c;
  c.benchmark = "csv";
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Runner, QuickModeScalesOnlyReplicatesAndEpochs) {
  RunConfig c;
  c.benchmark = "jump2d";
  c.replicates = 10;
  EXPECT_EQ(c.effective_replicates(), 10);
  EXPECT_EQ(c.effective_epochs(), 6000);
  c.quick = true;
  EXPECT_EQ(c.effective_replicates(), kQuickReplicates);
  EXPECT_EQ(c.effective_epochs(), 6000 / kQuickEpochDivisor);
  c.epochs = 100;
  EXPECT_EQ(c.effective_epochs(), kQuickMinEpochs);
}

TEST(Runner, SummaryTableHasPaperMetricSet) {
  std::vector<SummaryRow> rows(1);
  rows[0].ok = 3;
  rows[0].rmse = {1.5, 0.1};
  rows[0].crps = {1.2, 0.05};
  rows[0].coverage90 = {0.9, 0.01};
  const auto t = format_summary(rows, false);
  EXPECT_NE(t.find("RMSE"), std::string::npos);
  EXPECT_NE(t.find("CRPS"), std::string::npos);
  EXPECT_NE(t.find("90% Cov."), std::string::npos);
  EXPECT_NE(t.find("1.500 +- 0.100"), std::string::npos);
}

TEST(Runner, FailuresBecomeNaRows) {
  RunConfig c;
  c.benchmark = "jump1d";
  c.methods = {Method::gp};
  c.replicates = 1;
  c.n = 5100;
  c.deterministic = true;
  const auto res = run_benchmark(c);
  ASSERT_EQ(res.size(), 1u);
  ASSERT_TRUE(res[0].error.has_value());
  const auto csv = lines(metrics_csv(res, c));
  EXPECT_NE(csv[2].find("NA,NA,NA,NA,NA"), std::string::npos);
  EXPECT_EQ(summarize(res, c.methods)[0].failed, 1);
}

TEST(Runner, BgpSplitsEightyTwenty) {
  RunConfig c;
  c.benchmark = "bgp";
  c.n = 200;
  const auto data = make_replicate(c, SeededRng(3));
  EXPECT_EQ(data.train.size(), 160);
  EXPECT_EQ(data.test.size(), 40);
  EXPECT_EQ(data.target, data.test.y);
  c.benchmark = "friedman";
  const auto f = make_replicate(c, SeededRng(3));
  EXPECT_EQ(f.test.size(), 500);
  EXPECT_EQ(f.target, *f.test.truth);
}

TEST(LearningCurveCsv, LongFormat) {
  al::LearningCurve c;
  c.acquisition = al::Acquisition::random;
  c.points.push_back({50, 0.5, std::numeric_limits<double>::quiet_NaN(), 0.25, 0.9, 1.5});
  const auto l = lines(al::learning_curve_csv({c}, "exp2d", "gbc test", true));
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[1], "benchmark,method,replicate,n,metric_name,metric_value,wall_seconds");
  EXPECT_EQ(l[2], "exp2d,random,0,50,rmse,0.5,NA");
  EXPECT_EQ(l[3], "exp2d,random,0,50,crps,0.25,NA");
}

TEST(TrainPredict, ContainerRoundTripReproducesPredictionsBitExactly) {
  RunConfig cfg;
  cfg.benchmark = "jump1d";
  cfg.epochs = 30;
  cfg.K = 2;
  cfg.B = 20;
  const auto ds = generate_dataset("jump1d", 60, 3, std::nullopt, 2);
  Eigen::MatrixXd X(5, 1);
  X << 0.1, 0.3, 0.5, 0.7, 0.9;
  const std::vector<double> levels{0.05, 0.5, 0.95};
  for (Method m : {Method::gbc, Method::gbc_aug, Method::gbc_ensemble, Method::gp}) {
    const auto model = train_model(m, ds, cfg, SeededRng(4));
    const auto path = (std::filesystem::temp_directory_path() / "gbc_test_run_model.gbcm").string();
    io::save_model(model, path);
    const auto back = io::load_model(path).model;
    EXPECT_EQ(model_quantiles(model, X, levels, cfg.B), model_quantiles(back, X, levels, cfg.B)) << to_string(m);
    EXPECT_EQ(model_samples(model, X, 7, SeededRng(5)), model_samples(back, X, 7, SeededRng(5))) << to_string(m);
    const auto csv = lines(predictions_csv({"x1"}, X, levels, model_quantiles(back, X, levels, cfg.B),
                                           Eigen::MatrixXd(5, 0), "t"));
    EXPECT_EQ(csv[1], "x1,q_0.05,q_0.5,q_0.95");
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
  }
}

TEST(Runner, CrossedIntervalsLeaveCoverageNaButKeepOtherMetrics) {
  ReplicateData data;
  data.test.X = Eigen::MatrixXd::Zero(3, 1);
  data.target = Eigen::VectorXd::Zero(3);
  MethodResult r;
  run::detail::timed_evaluate(
      [](const Eigen::MatrixXd& X, const std::vector<double>& levels) {
        Eigen::MatrixXd Q(X.rows(), static_cast<Eigen::Index>(levels.size()));
        for (Eigen::Index i = 0; i < X.rows(); ++i)
          for (Eigen::Index k = 0; k < Q.cols(); ++k)
            Q(i, k) = i == 1 ? 0.5 - levels[static_cast<std::size_t>(k)] : levels[static_cast<std::size_t>(k)] - 0.5;
        return Q;
      },
      data, r);
  EXPECT_EQ(r.crossed_intervals, 1);
  EXPECT_TRUE(std::isnan(r.report.coverage90));
  EXPECT_EQ(r.report.rmse, 0.0);
  EXPECT_GT(r.report.crps_mean, 0.0);
  EXPECT_THROW(metrics::coverage(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)),
               ArgumentError);
}
