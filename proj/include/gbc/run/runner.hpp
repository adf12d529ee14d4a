#pragma once

#include "gbc/augment/dip.hpp"
#include "gbc/augment/gbc_aug.hpp"
#include "gbc/bench/generators.hpp"
#include "gbc/bench/split.hpp"
#include "gbc/core/parallel.hpp"
#include "gbc/core/stats.hpp"
#include "gbc/ensemble/ensemble.hpp"
#include "gbc/gp/gp.hpp"
#include "gbc/io/container.hpp"
#include "gbc/io/csv.hpp"
#include "gbc/iqn/model.hpp"
#include "gbc/metrics/evaluate.hpp"
#include "gbc/run/predict.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gbc::run {

using nlohmann::json;

enum class Method { gbc, gbc_aug, gbc_ensemble, gp };

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"gbc", "gbc_aug", "gbc_ensemble", "gp"};
  return names;
}

inline std::string to_string(Method m) { return method_names()[static_cast<std::size_t>(m)]; }

inline Method parse_method(const std::string& s) {
  const auto& names = method_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<Method>(i);
  throw ArgumentError("unknown method '" + s + "' (valid: gbc, gbc_aug, gbc_ensemble, gp)");
}

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names{"friedman", "bgp",         "jump2d", "jump1d",    "exp2d",
                                              "michalewicz", "proxy7d", "motorcycle", "csv"};
  return names;
}

/// Quick mode keeps at most this many replicates and divides epochs by the divisor.
inline constexpr int kQuickReplicates = 2;
inline constexpr int kQuickEpochDivisor = 20;
inline constexpr int kQuickMinEpochs = 50;

/// Protocol constants of one benchmark.
struct BenchmarkSpec {
  std::string name;
  Eigen::Index n = 0;       // training size, or total size when split_frac > 0
  Eigen::Index n_test = 0;  // separate test draw when split_frac == 0
  double split_frac = 0.0;
  double noise_sd = 0.0;
  bool score_against_truth = false;
  int epochs = 3000;
  bool gp_isotropic = false;
};

inline BenchmarkSpec benchmark_spec(const std::string& name) {
  if (name == "friedman") return {name, 2000, 500, 0.0, 1.0, true, 3000, true};
  if (name == "bgp") return {name, 2000, 0, 0.8, 0.0, false, 3000, true};
  if (name == "jump2d") return {name, 10201, 0, 0.9, 0.0, false, iqn::default_epochs(iqn::EpochFamily::jump2d), false};
  if (name == "jump1d") return {name, 500, 0, 0.8, 0.3, false, 3000, false};
  if (name == "exp2d" || name == "michalewicz" || name == "proxy7d") return {name, 500, 1000, 0.0, 0.0, true, 5000, false};
  if (name == "motorcycle" || name == "csv") return {name, 0, 0, 0.8, 0.0, false, 5000, false};
  std::string valid;
  for (const auto& b : benchmark_names()) valid += (valid.empty() ? "" : ", ") + b;
  throw ArgumentError("unknown benchmark '" + name + "' (valid: " + valid + ")");
}

struct RunConfig {
  std::string benchmark = "friedman";
  std::vector<Method> methods{Method::gbc};
  int replicates = 10;
  std::uint64_t seed = 0;
  /// "auto" (dip-test choice), "standard" or "quantile_dominant"; `weights` wins when set.
  std::string loss_preset = "auto";
  std::optional<iqn::LossWeights> weights;
  std::optional<int> epochs;
  /// IQN rows per step; 0 trains full batch.
  std::optional<int> batch_size;
  std::optional<Eigen::Index> n;
  std::optional<double> noise_sd;
  int d = 2;
  int K = 5;
  int B = 200;
  std::optional<bool> gp_isotropic;
  std::string data_path;
  std::string response = "y";
  std::vector<std::string> inputs;
  std::string out_dir = "results";
  bool quick = false;
  /// Writes NA for timings so reruns give byte-identical files.
  bool deterministic = false;
  int jobs = 1;

  void validate() const {
    benchmark_spec(benchmark);
    if (methods.empty()) throw ArgumentError("RunConfig: no methods");
    if (replicates < 1) throw ArgumentError("RunConfig: replicates must be >= 1");
    if (loss_preset != "auto" && loss_preset != "standard" && loss_preset != "quantile_dominant")
      throw ArgumentError("RunConfig: loss preset must be auto, standard or quantile_dominant");
    if (weights) weights->validate();
    if (epochs && *epochs < 1) throw ArgumentError("RunConfig: epochs must be positive");
    if (K < 1 || B < 1) throw ArgumentError("RunConfig: K and B must be positive");
    if ((benchmark == "csv" || benchmark == "motorcycle") && data_path.empty())
      throw ArgumentError("RunConfig: benchmark '" + benchmark + "' needs a data path");
  }

  int effective_replicates() const { return quick ? std::min(replicates, kQuickReplicates) : replicates; }

  int scale_epochs(int e) const { return quick ? std::max(kQuickMinEpochs, e / kQuickEpochDivisor) : e; }

  int effective_epochs() const { return scale_epochs(epochs.value_or(benchmark_spec(benchmark).epochs)); }

  json to_json() const {
    json j;
    j["benchmark"] = benchmark;
    json ms = json::array();
    for (auto m : methods) ms.push_back(to_string(m));
    j["methods"] = ms;
    j["replicates"] = effective_replicates();
    j["seed"] = seed;
    j["loss"] = weights ? json{weights->w1, weights->w2, weights->w3} : json(loss_preset);
    j["epochs"] = effective_epochs();
    if (batch_size) j["batch_size"] = *batch_size;
    if (n) j["n"] = *n;
    if (noise_sd) j["noise_sd"] = *noise_sd;
    if (benchmark == "bgp") j["d"] = d;
    j["K"] = K;
    j["B"] = B;
    j["gp_isotropic"] = gp_isotropic.value_or(benchmark_spec(benchmark).gp_isotropic);
    if (!data_path.empty()) {
      j["data"] = data_path;
      j["response"] = response;
    }
    j["quick"] = quick;
    j["deterministic"] = deterministic;
    return j;
  }
};

/// Full synthetic dataset of a generated benchmark (no split).
inline Dataset generate_dataset(const std::string& name, Eigen::Index n, std::uint64_t seed,
                                std::optional<double> noise_sd = std::nullopt, int d = 2) {
  const auto spec = benchmark_spec(name);
  const double noise = noise_sd.value_or(spec.noise_sd);
  if (name == "bgp") {
    bench::BgpConfig b;
    b.d = d;
    b.N = n;
    b.seed = seed;
    return bench::gen_bgp(b);
  }
  if (name == "jump2d") return bench::gen_jump2d_sine(n, seed);
  if (name == "jump1d") return bench::gen_jump1d(n, noise, seed);
  if (name == "motorcycle" || name == "csv") throw ArgumentError("benchmark '" + name + "' reads user data; nothing to generate");
  return bench::gen_from_function(bench::test_function(name), n, noise, seed);
}

struct ReplicateData {
  Dataset train;
  Dataset test;
  VectorXd target;
};

inline Dataset load_user_data(const RunConfig& cfg) {
  if (cfg.benchmark == "motorcycle") {
    const auto header = io::read_table(cfg.data_path).header;
    const auto pick = [&](const char* a, const char* b) {
      return std::find(header.begin(), header.end(), a) != header.end() ? std::string(a) : std::string(b);
    };
    const auto inputs = cfg.inputs.empty() ? std::vector<std::string>{pick("time_ms", "times")} : cfg.inputs;
    return io::load_csv(cfg.data_path, inputs, cfg.response == "y" ? pick("accel_g", "accel") : cfg.response);
  }
  return io::load_csv(cfg.data_path, cfg.inputs, cfg.response);
}

/// Training and test sets of replicate `r`: data from stream 0, split from stream 1.
inline ReplicateData make_replicate(const RunConfig& cfg, const SeededRng& rep, const Dataset* user_data = nullptr) {
  const auto spec = benchmark_spec(cfg.benchmark);
  const std::uint64_t data_seed = rep.split(0).seed();
  auto split_rng = rep.split(1);
  const Eigen::Index n = cfg.n.value_or(spec.n);
  const double noise = cfg.noise_sd.value_or(spec.noise_sd);
  ReplicateData out;
  Dataset all;
  if (spec.split_frac == 0.0) {
    const auto tf = bench::test_function(cfg.benchmark);
    out.train = bench::gen_from_function(tf, n, noise, data_seed);
    out.test = bench::gen_from_function(tf, spec.n_test, noise, SeededRng(data_seed).split(7).seed());
  } else {
    if (cfg.benchmark == "motorcycle" || cfg.benchmark == "csv") {
      if (!user_data) throw StateError("make_replicate: no data loaded for '" + cfg.benchmark + "'");
      all = *user_data;
    } else {
      all = generate_dataset(cfg.benchmark, n, data_seed, noise, cfg.d);
    }
    std::tie(out.train, out.test) = bench::split(all, spec.split_frac, split_rng);
  }
  out.target = spec.score_against_truth && out.test.truth ? *out.test.truth : out.test.y;
  return out;
}

struct MethodResult {
  std::string benchmark;
  Method method = Method::gbc;
  int replicate = 0;
  std::uint64_t seed = 0;
  metrics::MetricReport report;
  double fit_seconds = 0.0;
  double predict_seconds = 0.0;
  double score_seconds = 0.0;
  iqn::LossWeights weights;
  double classifier_accuracy = std::numeric_limits<double>::quiet_NaN();
  /// Test rows whose 0.05 quantile exceeds the 0.95 quantile; coverage is NA when positive.
  long crossed_intervals = 0;
  std::optional<std::string> error;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Scores a quantile predictor, timing the prediction and scoring phases separately.
template <typename P>
void timed_evaluate(const P& predictor, const ReplicateData& data, MethodResult& r) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> levels = iqn::quantile_grid(metrics::kDefaultGridSize);
  for (double extra : {metrics::kLowerLevel, 0.5, metrics::kUpperLevel})
    if (std::find(levels.begin(), levels.end(), extra) == levels.end()) levels.push_back(extra);
  std::sort(levels.begin(), levels.end());
  const MatrixXd Q = predictor(data.test.X, levels);
  r.predict_seconds = seconds_since(t0);
  const auto t1 = std::chrono::steady_clock::now();
  auto col = [&](double t) {
    return static_cast<Eigen::Index>(std::find(levels.begin(), levels.end(), t) - levels.begin());
  };
  const auto grid = iqn::quantile_grid(metrics::kDefaultGridSize);
  MatrixXd Qgrid(Q.rows(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t m = 0; m < grid.size(); ++m) Qgrid.col(static_cast<Eigen::Index>(m)) = Q.col(col(grid[m]));
  const VectorXd lower = Q.col(col(metrics::kLowerLevel)), upper = Q.col(col(metrics::kUpperLevel));
  r.crossed_intervals = static_cast<long>((lower.array() > upper.array()).count());
  if (r.crossed_intervals == 0) {
    r.report = metrics::score(Qgrid, Q.col(col(0.5)), lower, upper, data.target);
  } else {
    const VectorXd point = Q.col(col(0.5));
    r.report = metrics::score(Qgrid, point, point, point, data.target);
    r.report.coverage90 = std::numeric_limits<double>::quiet_NaN();
  }
  r.score_seconds = seconds_since(t1);
}

}  // namespace detail

inline iqn::LossWeights resolve_weights(const RunConfig& cfg, const VectorXd& y_train, const SeededRng& rng) {
  if (cfg.weights) return *cfg.weights;
  if (cfg.loss_preset == "standard") return iqn::LossWeights::standard();
  if (cfg.loss_preset == "quantile_dominant") return iqn::LossWeights::quantile_dominant();
  return augment::select_loss_weights(y_train, std::nullopt, rng).weights;
}

inline iqn::IqnConfig iqn_config_for(const RunConfig& cfg, const iqn::LossWeights& w) {
  iqn::IqnConfig c;
  c.epochs = cfg.effective_epochs();
  if (cfg.batch_size) c.batch_size = *cfg.batch_size;
  c.loss_weights = w;
  return c;
}

struct TrainInfo {
  iqn::LossWeights weights;
  double classifier_accuracy = std::numeric_limits<double>::quiet_NaN();
};

/// Fits `method` on `train`: loss weights from stream 0, fitting from stream 1.
inline io::AnyModel train_model(Method method, const Dataset& train, const RunConfig& cfg, const SeededRng& rng,
                                TrainInfo* info = nullptr) {
  if (method == Method::gp) {
    gp::GpOptions opt;
    opt.isotropic = cfg.gp_isotropic.value_or(benchmark_spec(cfg.benchmark).gp_isotropic);
    opt.jobs = cfg.jobs;
    auto fit_rng = rng.split(1);
    return gp::gp_fit(train, opt, fit_rng);
  }
  const auto w = resolve_weights(cfg, train.y, rng.split(0));
  if (info) info->weights = w;
  const auto icfg = iqn_config_for(cfg, w);
  if (method == Method::gbc) return iqn::train<float>(train, icfg, rng.split(1));
  if (method == Method::gbc_ensemble)
    return ensemble::train_seed_ensemble<float>(train, icfg, cfg.K, rng.split(1).seed(), cfg.jobs);
  augment::GbcAugOptions opt;
  opt.classifier.epochs = cfg.scale_epochs(opt.classifier.epochs);
  augment::GbcAugDiagnostics diag;
  auto m = augment::gbc_aug_train<float>(train, icfg, opt, rng.split(1), &diag);
  if (info) info->classifier_accuracy = diag.classifier_accuracy;
  return m;
}

/// Fits `method` on the replicate's training set and scores it on the test set.
/// Failures are recorded in the result instead of thrown.
inline MethodResult fit_and_score(Method method, const ReplicateData& data, const RunConfig& cfg,
                                  const SeededRng& rng) {
  MethodResult r;
  r.benchmark = cfg.benchmark;
  r.method = method;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    TrainInfo info;
    const auto model = train_model(method, data.train, cfg, rng, &info);
    r.fit_seconds = detail::seconds_since(t0);
    r.weights = info.weights;
    r.classifier_accuracy = info.classifier_accuracy;
    detail::timed_evaluate(
        [&](const MatrixXd& X, const std::vector<double>& levels) { return model_quantiles(model, X, levels, cfg.B); },
        data, r);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

/// Every (replicate, method) result, ordered by replicate then method.
/// Replicate r draws everything from split(seed, r), so adding replicates
/// leaves earlier ones unchanged.
inline std::vector<MethodResult> run_benchmark(const RunConfig& cfg) {
  cfg.validate();
  std::optional<Dataset> user;
  if (cfg.benchmark == "csv" || cfg.benchmark == "motorcycle") user = load_user_data(cfg);
  const int R = cfg.effective_replicates();
  const SeededRng master(cfg.seed);
  std::vector<std::vector<MethodResult>> per(static_cast<std::size_t>(R));
  parallel_for(static_cast<std::size_t>(R), cfg.jobs, [&](std::size_t r) {
    const auto rep = master.split(r);
    const auto data = make_replicate(cfg, rep, user ? &*user : nullptr);
    for (auto m : cfg.methods) {
      auto res = fit_and_score(m, data, cfg, rep.split(100 + static_cast<std::uint64_t>(m)));
      res.replicate = static_cast<int>(r);
      res.seed = rep.seed();
      per[r].push_back(std::move(res));
    }
  });
  std::vector<MethodResult> out;
  for (auto& v : per)
    for (auto& x : v) out.push_back(std::move(x));
  return out;
}

inline std::string csv_number(double v) { return std::isfinite(v) ? io::format_double(v) : "NA"; }

inline std::string header_comment(const json& config) {
  return "gbc " + io::version_string() + " config=" + config.dump();
}

inline std::string metrics_csv(const std::vector<MethodResult>& results, const RunConfig& cfg) {
  std::ostringstream out;
  out << "# " << header_comment(cfg.to_json()) << '\n';
  out << "benchmark,method,replicate,seed,rmse,rmspe,crps,coverage90,fit_seconds\n";
  for (const auto& r : results) {
    const bool ok = !r.error;
    const auto num = [&](double v) { return ok ? csv_number(v) : std::string("NA"); };
    out << r.benchmark << ',' << to_string(r.method) << ',' << r.replicate << ',' << r.seed << ','
        << num(r.report.rmse) << ',' << num(r.report.rmspe) << ',' << num(r.report.crps_mean) << ','
        << num(r.report.coverage90) << ',' << (cfg.deterministic || !ok ? "NA" : csv_number(r.fit_seconds)) << '\n';
  }
  return out.str();
}

struct MetricSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
};

struct SummaryRow {
  Method method = Method::gbc;
  int ok = 0;
  int failed = 0;
  MetricSummary rmse, crps, coverage90, rmspe, fit_seconds;
};

inline MetricSummary summarize_values(const std::vector<double>& v) {
  MetricSummary s;
  std::vector<double> finite;
  for (double x : v)
    if (std::isfinite(x)) finite.push_back(x);
  if (finite.empty()) return s;
  const VectorXd e = Eigen::Map<const VectorXd>(finite.data(), static_cast<Eigen::Index>(finite.size()));
  s.mean = mean(e);
  s.se = finite.size() > 1 ? standard_error(e) : 0.0;
  return s;
}

/// Mean and standard error over replicates, one row per method in run order.
inline std::vector<SummaryRow> summarize(const std::vector<MethodResult>& results, const std::vector<Method>& order) {
  std::vector<SummaryRow> rows;
  for (auto m : order) {
    SummaryRow row;
    row.method = m;
    std::vector<double> rmse, crps, cov, rmspe, fit;
    for (const auto& r : results) {
      if (r.method != m) continue;
      if (r.error) {
        ++row.failed;
        continue;
      }
      ++row.ok;
      rmse.push_back(r.report.rmse);
      crps.push_back(r.report.crps_mean);
      cov.push_back(r.report.coverage90);
      rmspe.push_back(r.report.rmspe);
      fit.push_back(r.fit_seconds);
    }
    row.rmse = summarize_values(rmse);
    row.crps = summarize_values(crps);
    row.coverage90 = summarize_values(cov);
    row.rmspe = summarize_values(rmspe);
    row.fit_seconds = summarize_values(fit);
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_pm(const MetricSummary& s, int precision = 3) {
  if (!std::isfinite(s.mean)) return "NA";
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << s.mean << " +- " << s.se;
  return o.str();
}

/// Plain-text table: Method | RMSE | CRPS | 90% Cov. (mean +- SE).
inline std::string format_summary(const std::vector<SummaryRow>& rows, bool with_time) {
  std::ostringstream o;
  o << std::left << std::setw(14) << "Method" << std::setw(20) << "RMSE" << std::setw(20) << "CRPS" << std::setw(20)
    << "90% Cov.";
  if (with_time) o << std::setw(20) << "Fit (s)";
  o << "n\n";
  for (const auto& r : rows) {
    o << std::setw(14) << to_string(r.method) << std::setw(20) << format_pm(r.rmse) << std::setw(20)
      << format_pm(r.crps) << std::setw(20) << format_pm(r.coverage90);
    if (with_time) o << std::setw(20) << format_pm(r.fit_seconds, 2);
    o << r.ok;
    if (r.failed) o << " (" << r.failed << " failed)";
    o << '\n';
  }
  return o.str();
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows, const RunConfig& cfg) {
  std::ostringstream out;
  out << "# " << header_comment(cfg.to_json()) << '\n';
  out << "benchmark,method,n_ok,n_failed,rmse_mean,rmse_se,crps_mean,crps_se,coverage90_mean,coverage90_se\n";
  for (const auto& r : rows)
    out << cfg.benchmark << ',' << to_string(r.method) << ',' << r.ok << ',' << r.failed << ','
        << csv_number(r.rmse.mean) << ',' << csv_number(r.rmse.se) << ',' << csv_number(r.crps.mean) << ','
        << csv_number(r.crps.se) << ',' << csv_number(r.coverage90.mean) << ',' << csv_number(r.coverage90.se)
        << '\n';
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IngestionError(path + ": write failed");
}

}  // namespace gbc::run
