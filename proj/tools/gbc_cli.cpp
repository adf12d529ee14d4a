#include "gbc/al/al.hpp"
#include "gbc/bench/generators.hpp"
#include "gbc/io/container.hpp"
#include "gbc/io/csv.hpp"
#include "gbc/run/predict.hpp"
#include "gbc/run/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace gbc;
using nlohmann::json;

namespace {

std::vector<double> parse_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(io::parse_double(item, 1, out.size() + 1, what));
  }
  return out;
}

std::optional<iqn::LossWeights> parse_weights(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto w = parse_numbers(s, "--weights");
  if (w.size() != 3) throw ArgumentError("--weights needs three comma-separated values w1,w2,w3");
  iqn::LossWeights lw{w[0], w[1], w[2]};
  lw.validate();
  return lw;
}

/// Output directory: the flag, else GBC_OUTPUT_DIR, else the default.
std::string resolve_out_dir(const std::string& flag, bool flag_given) {
  if (flag_given) return flag;
  if (const char* env = std::getenv("GBC_OUTPUT_DIR"); env && *env) return env;
  return flag;
}

struct DataOptions {
  std::string data;
  std::string benchmark;
  std::string response = "y";
  std::vector<std::string> inputs;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  double noise = -1.0;
  int d = 2;

  void add(CLI::App* app, bool source) {
    if (source) {
      app->add_option("--data", data, "CSV file with inputs and a response column");
      app->add_option("--benchmark", benchmark, "Generate the data from this benchmark instead of --data");
      app->add_option("--response", response, "Response column name")->capture_default_str();
      app->add_option("--inputs", inputs, "Input column names (default: all other columns)")->delimiter(',');
    }
    app->add_option("--n", n, "Generated sample size (default: the benchmark's)");
    app->add_option("--seed", seed, "Master seed")->capture_default_str();
    app->add_option("--noise", noise, "Generated noise standard deviation (default: the benchmark's)");
    app->add_option("--d", d, "Input dimension for bgp")->capture_default_str();
  }

  Dataset load() const {
    if (!data.empty()) return io::load_csv(data, inputs, response);
    if (benchmark.empty()) throw ArgumentError("give --data or --benchmark");
    const auto spec = run::benchmark_spec(benchmark);
    return run::generate_dataset(benchmark, n > 0 ? n : spec.n, seed,
                                 noise >= 0.0 ? std::optional<double>(noise) : std::nullopt, d);
  }
};

int cmd_gen_data(const std::string& benchmark, const DataOptions& o, const std::string& out) {
  DataOptions g = o;
  g.benchmark = benchmark;
  g.data.clear();
  const Dataset ds = g.load();
  io::save_csv(ds, out, {"gbc " + io::version_string() + " " + ds.provenance});
  std::cout << "wrote " << ds.size() << " rows to " << out << '\n';
  return 0;
}

int cmd_train(const DataOptions& o, const run::RunConfig& cfg, run::Method method, const std::string& out) {
  const Dataset ds = o.load();
  const SeededRng rng(o.seed);
  run::TrainInfo info;
  const auto model = run::train_model(method, ds, cfg, rng, &info);
  json extra = cfg.to_json();
  extra["method"] = run::to_string(method);
  extra["n_train"] = ds.size();
  extra["inputs"] = ds.column_names();
  extra["source"] = ds.provenance.empty() ? o.data : ds.provenance;
  if (method != run::Method::gp) extra["resolved_weights"] = {info.weights.w1, info.weights.w2, info.weights.w3};
  io::save_model(model, out, extra);
  std::cout << "trained " << run::to_string(method) << " on " << ds.size() << " rows; wrote " << out << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input, std::vector<std::string> inputs,
                const std::string& levels_text, int samples, std::uint64_t seed, int B, const std::string& out) {
  const auto loaded = io::load_model(model_path);
  const auto table = io::read_table(input);
  if (inputs.empty())
    for (const auto& h : table.header)
      if (h != "y" && h != "truth" && h != "regime") inputs.push_back(h);
  std::vector<std::size_t> cols;
  for (const auto& nm : inputs) cols.push_back(table.column(nm, input));
  MatrixXd X(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][cols[j]];

  const auto levels = parse_numbers(levels_text, "--levels");
  MatrixXd Q(X.rows(), 0), S(X.rows(), 0);
  if (!levels.empty()) Q = run::model_quantiles(loaded.model, X, levels, B);
  if (samples > 0) S = run::model_samples(loaded.model, X, samples, SeededRng(seed));
  if (levels.empty() && samples <= 0) throw ArgumentError("nothing to predict: give --levels and/or --samples");
  const std::string header =
      "gbc " + io::version_string() + " model=" + model_path + " kind=" + io::model_kind(loaded.model);
  run::write_text(out, run::predictions_csv(inputs, X, levels, Q, S, header));
  std::cout << "wrote predictions for " << X.rows() << " rows to " << out << '\n';
  return 0;
}

int cmd_benchmark(const run::RunConfig& cfg) {
  const auto results = run::run_benchmark(cfg);
  std::string stem = cfg.benchmark;
  if (cfg.benchmark == "bgp") stem += "_d" + std::to_string(cfg.d);
  const auto metrics_path = (std::filesystem::path(cfg.out_dir) / (stem + "_metrics.csv")).string();
  const auto summary_path = (std::filesystem::path(cfg.out_dir) / (stem + "_summary.csv")).string();
  run::write_text(metrics_path, run::metrics_csv(results, cfg));
  const auto rows = run::summarize(results, cfg.methods);
  run::write_text(summary_path, run::summary_csv(rows, cfg));
  for (const auto& r : results) {
    if (r.error)
      std::cerr << "warning: " << run::to_string(r.method) << " replicate " << r.replicate << " failed: " << *r.error
                << '\n';
    else if (r.crossed_intervals > 0)
      std::cerr << "warning: " << run::to_string(r.method) << " replicate " << r.replicate << ": "
                << r.crossed_intervals << " crossed 90% intervals; coverage reported as NA\n";
  }
  std::cout << cfg.benchmark << " (" << cfg.effective_replicates() << " replicates, mean +- SE)\n"
            << run::format_summary(rows, !cfg.deterministic) << "wrote " << metrics_path << " and " << summary_path
            << '\n';
  return 0;
}

struct AlOptions {
  std::string benchmark = "exp2d";
  al::AlConfig cfg;
  std::string acquisition = "disagreement";
  int replicates = 1;
  std::uint64_t seed = 0;
  Eigen::Index test_n = 1000;
  double noise = 0.0;
  bool quick = false;
  bool deterministic = false;
  std::string out;
};

int cmd_al(AlOptions o) {
  const auto tf = bench::test_function(o.benchmark);
  o.cfg.acquisition = al::parse_acquisition(o.acquisition);
  if (o.quick) {
    o.replicates = std::min(o.replicates, run::kQuickReplicates);
    o.cfg.epochs = std::max(run::kQuickMinEpochs, o.cfg.epochs / run::kQuickEpochDivisor);
    if (o.cfg.final_epochs > 0)
      o.cfg.final_epochs = std::max(run::kQuickMinEpochs, o.cfg.final_epochs / run::kQuickEpochDivisor);
  }
  o.cfg.validate();
  const SeededRng master(o.seed);
  const Dataset test = bench::gen_from_function(tf, o.test_n, 0.0, master.split(1000000).seed(), true);
  const al::Oracle oracle = [&, noise_rng = master.split(2000000)](const VectorXd& x) mutable {
    return tf.f(x) + (o.noise > 0.0 ? o.noise * noise_rng.normal() : 0.0);
  };
  std::vector<al::LearningCurve> curves;
  for (int r = 0; r < o.replicates; ++r) {
    curves.push_back(al::al_loop(oracle, tf.dim, o.cfg, test, master.split(static_cast<std::uint64_t>(r)).seed()));
    const auto& c = curves.back();
    if (c.error) std::cerr << "warning: replicate " << r << ": " << *c.error << '\n';
    if (!c.points.empty())
      std::cout << "replicate " << r << ": n=" << c.points.back().n << " rmse=" << c.points.back().rmse
                << " crps=" << c.points.back().crps << '\n';
  }
  json meta{{"benchmark", o.benchmark},
            {"acquisition", o.acquisition},
            {"n0", o.cfg.n0},
            {"budget", o.cfg.budget},
            {"candidates", o.cfg.candidate_count},
            {"retrain_every", o.cfg.retrain_every},
            {"K", o.cfg.K},
            {"alpha", o.cfg.alpha},
            {"eval_every", o.cfg.eval_every},
            {"epochs", o.cfg.epochs},
            {"final_epochs", o.cfg.final_epochs},
            {"reduced_loop_epochs", o.cfg.reduced_epochs()},
            {"warm_start", o.cfg.warm_start},
            {"replicates", o.replicates},
            {"seed", o.seed},
            {"test_n", o.test_n},
            {"noise", o.noise},
            {"quick", o.quick}};
  const std::string header = "gbc " + io::version_string() + " config=" + meta.dump();
  const std::string out =
      o.out.empty() ? o.benchmark + "_" + o.acquisition + "_curve.csv" : o.out;
  run::write_text(out, al::learning_curve_csv(curves, o.benchmark, header, o.deterministic));
  std::cout << "wrote " << out << '\n';
  return 0;
}

void add_run_options(CLI::App* app, run::RunConfig& cfg, std::string& weights, int& epochs, bool& iso, bool& ard,
                     int& batch) {
  app->add_option("--loss", cfg.loss_preset, "Loss preset: auto, standard or quantile_dominant")
      ->capture_default_str();
  app->add_option("--weights", weights, "Explicit loss weights w1,w2,w3 (overrides --loss)");
  app->add_option("--epochs", epochs, "IQN epochs (default: the benchmark's)");
  app->add_option("--batch-size", batch, "IQN mini-batch size; 0 trains full batch");
  app->add_option("--K", cfg.K, "Ensemble size for gbc_ensemble")->capture_default_str();
  app->add_option("--B", cfg.B, "Stratified levels per ensemble member")->capture_default_str();
  app->add_flag("--gp-isotropic", iso, "GP with one shared length scale");
  app->add_flag("--gp-ard", ard, "GP with one length scale per input");
  app->add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str();
}

void apply_run_options(run::RunConfig& cfg, const std::string& weights, int epochs, bool iso, bool ard, int batch) {
  cfg.weights = parse_weights(weights);
  if (batch >= 0) cfg.batch_size = batch;
  if (epochs > 0) cfg.epochs = epochs;
  if (iso && ard) throw ArgumentError("--gp-isotropic and --gp-ard are exclusive");
  if (iso) cfg.gp_isotropic = true;
  if (ard) cfg.gp_isotropic = false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative Bayesian computation with implicit quantile networks, plus a GP baseline"};
  app.set_config("--config", "", "key=value config file; [section] names a subcommand; flags win");
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a benchmark dataset as CSV");
  std::string gen_bench, gen_out;
  DataOptions gen_opts;
  gen->add_option("benchmark", gen_bench, "friedman, bgp, jump2d, jump1d, exp2d, michalewicz, proxy7d")->required();
  gen->add_option("--out", gen_out, "Output CSV path")->required();
  gen_opts.add(gen, false);

  // train
  auto* train = app.add_subcommand("train", "Fit a model and write a model container");
  DataOptions train_data;
  run::RunConfig train_cfg;
  std::string train_method = "gbc", train_out, train_weights;
  int train_epochs = 0, train_batch = -1;
  bool train_iso = false, train_ard = false;
  train_data.add(train, true);
  train->add_option("--method", train_method, "gbc, gbc_aug, gbc_ensemble or gp")->capture_default_str();
  train->add_option("--out", train_out, "Model container path")->required();
  add_run_options(train, train_cfg, train_weights, train_epochs, train_iso, train_ard, train_batch);

  // predict
  auto* pred = app.add_subcommand("predict", "Predictive quantiles and/or samples from a model container");
  std::string pred_model, pred_input, pred_out, pred_levels;
  std::vector<std::string> pred_inputs;
  int pred_samples = 0, pred_B = 200;
  std::uint64_t pred_seed = 0;
  pred->add_option("--model", pred_model, "Model container")->required();
  pred->add_option("--input", pred_input, "CSV of inputs")->required();
  pred->add_option("--inputs", pred_inputs, "Input column names (default: all but y/truth/regime)")->delimiter(',');
  pred->add_option("--levels", pred_levels, "Quantile levels, e.g. 0.05,0.5,0.95");
  pred->add_option("--samples", pred_samples, "Predictive draws per row");
  pred->add_option("--B", pred_B, "Stratified levels per ensemble member")->capture_default_str();
  pred->add_option("--seed", pred_seed, "Seed for --samples")->capture_default_str();
  pred->add_option("--out", pred_out, "Output CSV path")->required();

  // benchmark
  auto* bm = app.add_subcommand("benchmark", "Replicated benchmark: metrics CSV plus a mean +- SE summary");
  run::RunConfig bm_cfg;
  std::vector<std::string> bm_methods;
  std::string bm_weights, bm_out = "results";
  int bm_epochs = 0, bm_batch = -1;
  long long bm_n = 0;
  double bm_noise = -1.0;
  bool bm_iso = false, bm_ard = false;
  bm->add_option("benchmark", bm_cfg.benchmark, "Benchmark name")->required();
  bm->add_option("--method", bm_methods, "gbc, gbc_aug, gbc_ensemble, gp (repeatable)");
  bm->add_option("--replicates", bm_cfg.replicates, "Replicates")->capture_default_str();
  bm->add_option("--seed", bm_cfg.seed, "Master seed")->capture_default_str();
  bm->add_option("--n", bm_n, "Sample size override");
  bm->add_option("--noise", bm_noise, "Noise standard deviation override");
  bm->add_option("--d", bm_cfg.d, "Input dimension for bgp")->capture_default_str();
  bm->add_option("--data", bm_cfg.data_path, "CSV for the csv and motorcycle benchmarks");
  bm->add_option("--response", bm_cfg.response, "Response column for --data")->capture_default_str();
  bm->add_option("--inputs", bm_cfg.inputs, "Input columns for --data")->delimiter(',');
  auto* bm_out_opt = bm->add_option("--out-dir", bm_out, "Output directory (env GBC_OUTPUT_DIR)")->capture_default_str();
  bm->add_flag("--quick", bm_cfg.quick, "At most 2 replicates and epochs / 20");
  bm->add_flag("--deterministic", bm_cfg.deterministic, "Write NA timings so reruns are byte-identical");
  add_run_options(bm, bm_cfg, bm_weights, bm_epochs, bm_iso, bm_ard, bm_batch);

  // al
  auto* alc = app.add_subcommand("al", "Active-learning loop; writes a learning-curve CSV");
  AlOptions al_opts;
  auto* al_out_opt = alc->add_option("--out", al_opts.out, "Learning-curve CSV (default under GBC_OUTPUT_DIR)");
  alc->add_option("benchmark", al_opts.benchmark, "exp2d, michalewicz, proxy7d or friedman")->capture_default_str();
  alc->add_option("--acquisition", al_opts.acquisition, "disagreement, quantile_width or random")->capture_default_str();
  alc->add_option("--n0", al_opts.cfg.n0, "Initial LHS size")->capture_default_str();
  alc->add_option("--budget", al_opts.cfg.budget, "Acquisitions")->capture_default_str();
  alc->add_option("--candidates", al_opts.cfg.candidate_count, "LHS candidate pool per round")->capture_default_str();
  alc->add_option("--retrain-every", al_opts.cfg.retrain_every, "Acquisitions between retrains")->capture_default_str();
  alc->add_option("--K", al_opts.cfg.K, "Ensemble size")->capture_default_str();
  alc->add_option("--alpha", al_opts.cfg.alpha, "Randomized-prior scale")->capture_default_str();
  alc->add_option("--draws", al_opts.cfg.draws, "Levels per member for disagreement")->capture_default_str();
  alc->add_option("--eval-every", al_opts.cfg.eval_every, "Acquisitions between checkpoints")->capture_default_str();
  alc->add_option("--epochs", al_opts.cfg.epochs, "Epochs per retrain inside the loop")->capture_default_str();
  alc->add_option("--final-epochs", al_opts.cfg.final_epochs, "Epochs of the final from-scratch fit (0: none)")
      ->capture_default_str();
  alc->add_flag("--warm-start", al_opts.cfg.warm_start, "Continue previous weights when retraining");
  alc->add_flag("--stochastic", al_opts.cfg.stochastic_oracle, "Allow repeated inputs");
  alc->add_option("--replicates", al_opts.replicates, "Replicates")->capture_default_str();
  alc->add_option("--seed", al_opts.seed, "Master seed")->capture_default_str();
  alc->add_option("--test-n", al_opts.test_n, "Test-set size")->capture_default_str();
  alc->add_option("--noise", al_opts.noise, "Oracle noise standard deviation")->capture_default_str();
  alc->add_option("--jobs", al_opts.cfg.jobs, "Worker threads")->capture_default_str();
  alc->add_flag("--quick", al_opts.quick, "At most 2 replicates and epochs / 20");
  alc->add_flag("--deterministic", al_opts.deterministic, "Write NA timings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen_data(gen_bench, gen_opts, gen_out);
    if (*train) {
      apply_run_options(train_cfg, train_weights, train_epochs, train_iso, train_ard, train_batch);
      train_cfg.benchmark = train_data.benchmark.empty() ? "csv" : train_data.benchmark;
      if (!train_data.data.empty()) train_cfg.data_path = train_data.data;
      if (train_epochs <= 0 && train_data.benchmark.empty()) {
        const Eigen::Index n = io::read_table(train_data.data).rows.size();
        train_cfg.epochs = iqn::default_epochs_for_size(n);
      }
      return cmd_train(train_data, train_cfg, run::parse_method(train_method), train_out);
    }
    if (*pred) return cmd_predict(pred_model, pred_input, pred_inputs, pred_levels, pred_samples, pred_seed, pred_B,
                                  pred_out);
    if (*bm) {
      apply_run_options(bm_cfg, bm_weights, bm_epochs, bm_iso, bm_ard, bm_batch);
      bm_cfg.methods.clear();
      for (const auto& m : bm_methods.empty() ? std::vector<std::string>{"gbc"} : bm_methods)
        bm_cfg.methods.push_back(run::parse_method(m));
      if (bm_n > 0) bm_cfg.n = static_cast<Eigen::Index>(bm_n);
      if (bm_noise >= 0.0) bm_cfg.noise_sd = bm_noise;
      bm_cfg.out_dir = resolve_out_dir(bm_out, bm_out_opt->count() > 0);
      return cmd_benchmark(bm_cfg);
    }
    if (*alc) {
      if (al_out_opt->count() == 0) {
        const std::string dir = resolve_out_dir("", false);
        if (!dir.empty())
          al_opts.out = (std::filesystem::path(dir) / (al_opts.benchmark + "_" + al_opts.acquisition + "_curve.csv"))
                            .string();
      }
      return cmd_al(al_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
