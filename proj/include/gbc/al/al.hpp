#pragma once

#include "gbc/bench/lhs.hpp"
#include "gbc/core/dataset.hpp"
#include "gbc/core/rng.hpp"
#include "gbc/core/types.hpp"
#include "gbc/ensemble/ensemble.hpp"
#include "gbc/iqn/model.hpp"
#include "gbc/io/csv.hpp"
#include "gbc/iqn/predict.hpp"
#include "gbc/metrics/evaluate.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gbc::al {

enum class Acquisition { disagreement, quantile_width, random };

inline std::string to_string(Acquisition a) {
  switch (a) {
    case Acquisition::disagreement: return "disagreement";
    case Acquisition::quantile_width: return "quantile_width";
    case Acquisition::random: return "random";
  }
  return "unknown";
}

inline Acquisition parse_acquisition(const std::string& s) {
  if (s == "disagreement") return Acquisition::disagreement;
  if (s == "quantile_width") return Acquisition::quantile_width;
  if (s == "random") return Acquisition::random;
  throw ArgumentError("unknown acquisition '" + s + "' (valid: disagreement, quantile_width, random)");
}

struct AlConfig {
  Eigen::Index n0 = 50;
  int budget = 250;
  Eigen::Index candidate_count = 2000;
  int retrain_every = 1;
  Acquisition acquisition = Acquisition::disagreement;
  int K = 3;
  double alpha = 0.5;
  int eval_every = 1;
  /// Levels per member when scoring disagreement.
  int draws = 64;
  /// Epochs of each retrain inside the loop; with warm_start these continue
  /// the previous weights instead of starting over.
  int epochs = 1500;
  bool warm_start = false;
  /// Epochs of the from-scratch fit behind the final checkpoint; 0 keeps the loop model.
  int final_epochs = 3000;
  /// Lets the loop re-query an existing design point (noisy simulators).
  bool stochastic_oracle = false;
  double duplicate_tol = 1e-9;
  iqn::IqnConfig iqn;
  int jobs = 1;

  void validate() const {
    if (n0 < 2) throw ArgumentError("AlConfig: n0 must be >= 2");
    if (budget < 0) throw ArgumentError("AlConfig: budget must be >= 0");
    if (candidate_count < 1) throw ArgumentError("AlConfig: candidate_count must be positive");
    if (retrain_every < 1) throw ArgumentError("AlConfig: retrain_every must be >= 1");
    if (eval_every < 1) throw ArgumentError("AlConfig: eval_every must be >= 1");
    if (acquisition != Acquisition::quantile_width && K < 2)
      throw ArgumentError("AlConfig: ensemble acquisition requires K >= 2");
    if (alpha < 0.0) throw ArgumentError("AlConfig: alpha must be >= 0");
    if (draws < 1) throw ArgumentError("AlConfig: draws must be >= 1");
    if (epochs < 1 || final_epochs < 0) throw ArgumentError("AlConfig: epochs must be positive");
  }

  /// True when loop retrains use fewer passes than the final fit.
  bool reduced_epochs() const { return final_epochs > 0 && epochs < final_epochs; }
};

struct Checkpoint {
  Eigen::Index n = 0;
  double rmse = 0.0;
  double rmspe = 0.0;
  double crps = 0.0;
  double coverage90 = 0.0;
  double wall_seconds = 0.0;
};

struct LearningCurve {
  std::vector<Checkpoint> points;
  std::uint64_t seed = 0;
  Acquisition acquisition = Acquisition::disagreement;
  MatrixXd X;
  VectorXd y;
  /// Best candidate score of every round (empty for random acquisition).
  std::vector<double> score_trace;
  long crossings = 0;
  std::optional<std::string> error;

  bool complete() const { return !error.has_value(); }
};

using Oracle = std::function<double(const VectorXd&)>;

/// q(0.95) - q(0.05) per row of X, clamped at 0; each crossed row bumps `crossings`.
template <iqn::HeadModel M>
VectorXd quantile_width_batch(const M& model, const MatrixXd& X, long& crossings) {
  const MatrixXd Q = iqn::quantile_matrix(model, X, {0.05, 0.95});
  VectorXd w(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double d = Q(i, 1) - Q(i, 0);
    if (d < 0.0) ++crossings;
    w(i) = std::max(d, 0.0);
  }
  return w;
}

template <iqn::HeadModel M>
double quantile_width_score(const M& model, const VectorXd& x, long& crossings) {
  return quantile_width_batch(model, MatrixXd(x.transpose()), crossings)(0);
}

/// Index of the largest finite score; ties go to the lowest index.
inline Eigen::Index select_next(const VectorXd& scores) {
  if (scores.size() == 0) throw ArgumentError("select_next: no candidates");
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (std::isfinite(scores(i)) && (best < 0 || scores(i) > scores(best))) best = i;
  if (best < 0) throw AcquisitionError("select_next: every candidate score is non-finite");
  return best;
}

/// Sets the score of every candidate within `tol` (max norm) of a design row to -inf.
inline void mask_duplicates(VectorXd& scores, const MatrixXd& candidates, const MatrixXd& design, double tol) {
  for (Eigen::Index i = 0; i < candidates.rows(); ++i)
    for (Eigen::Index j = 0; j < design.rows(); ++j)
      if ((candidates.row(i) - design.row(j)).cwiseAbs().maxCoeff() <= tol) {
        scores(i) = -std::numeric_limits<double>::infinity();
        break;
      }
}

namespace detail {

/// Surrogate of the loop: an ensemble, or one IQN for quantile width.
class Surrogate {
 public:
  explicit Surrogate(const AlConfig& cfg) : cfg_(cfg) {}

  void fit(const Dataset& data, int epochs, const SeededRng& rng) {
    iqn::IqnConfig c = cfg_.iqn;
    c.epochs = epochs;
    if (cfg_.acquisition == Acquisition::quantile_width) {
      single_ = iqn::train<float>(data, c, rng);
    } else {
      ensemble::EnsembleOptions opt;
      opt.K = cfg_.K;
      opt.alpha = cfg_.alpha;
      opt.seed = rng.seed();
      opt.jobs = cfg_.jobs;
      ens_ = ensemble::train_ensemble<float>(data, c, opt);
    }
    fitted_ = true;
  }

  void update(const Dataset& data, const SeededRng& rng) {
    if (!fitted_ || !cfg_.warm_start) return fit(data, cfg_.epochs, rng);
    if (cfg_.acquisition == Acquisition::quantile_width) {
      SeededRng r = rng;
      iqn::continue_training(single_, data, cfg_.epochs, r);
    } else {
      parallel_for(ens_.size(), cfg_.jobs, [&](std::size_t k) {
        SeededRng r = rng.split(k);
        ensemble::continue_member(ens_.members[k], data, cfg_.epochs, r);
      });
    }
  }

  VectorXd score(const MatrixXd& C, const SeededRng& rng, long& crossings) const {
    if (cfg_.acquisition == Acquisition::quantile_width) return quantile_width_batch(single_, C, crossings);
    return ensemble::disagreement_batch(ens_, C, cfg_.draws, rng, cfg_.jobs);
  }

  metrics::MetricReport evaluate(const Dataset& test) const {
    if (cfg_.acquisition == Acquisition::quantile_width)
      return metrics::evaluate(metrics::iqn_predictor(single_), test.X, test.y);
    return metrics::evaluate(metrics::pooled_predictor(ens_.members), test.X, test.y);
  }

  bool fitted() const { return fitted_; }

 private:
  const AlConfig& cfg_;
  bool fitted_ = false;
  iqn::IqnModel<float> single_;
  ensemble::RandomizedPriorEnsemble<float> ens_;
};

inline Dataset as_dataset(const std::vector<VectorXd>& xs, const std::vector<double>& ys) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(xs.size());
  ds.X.resize(n, xs.front().size());
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.X.row(i) = xs[static_cast<std::size_t>(i)].transpose();
    ds.y(i) = ys[static_cast<std::size_t>(i)];
  }
  return ds;
}

}  // namespace detail

/// Sequential design on [0,1]^dim.
///
/// Starts from an LHS of n0 points (or `initial_design`), then each round
/// draws a fresh LHS candidate pool, acquires the best-scoring candidate,
/// queries the oracle and retrains every `retrain_every` acquisitions.
/// Checkpoints are scored on `test` after the initial design, every
/// `eval_every` acquisitions and at the end; the final one refits from
/// scratch with `final_epochs`. Random acquisition fits only at checkpoints.
/// An oracle failure stops the loop and returns the curve so far with `error` set.
inline LearningCurve al_loop(const Oracle& oracle, Eigen::Index dim, const AlConfig& cfg, const Dataset& test,
                             std::uint64_t seed, const std::optional<MatrixXd>& initial_design = std::nullopt) {
  cfg.validate();
  if (dim < 1) throw ArgumentError("al_loop: dim must be positive");
  if (test.dim() != dim) throw ShapeError("al_loop: test set width does not match dim");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  LearningCurve curve;
  curve.seed = seed;
  curve.acquisition = cfg.acquisition;
  const SeededRng root(seed);
  auto design_rng = root.split(0), pool_rng = root.split(1), pick_rng = root.split(4);
  const SeededRng fit_rng = root.split(2), score_rng = root.split(3);

  MatrixXd X0 = initial_design ? *initial_design : bench::lhs(cfg.n0, dim, design_rng);
  if (X0.cols() != dim) throw ShapeError("al_loop: initial design width does not match dim");
  std::vector<VectorXd> xs;
  std::vector<double> ys;
  auto finish = [&] {
    if (!xs.empty()) {
      const Dataset d = detail::as_dataset(xs, ys);
      curve.X = d.X;
      curve.y = d.y;
    }
    return curve;
  };
  try {
    for (Eigen::Index i = 0; i < X0.rows(); ++i) {
      const VectorXd x = X0.row(i).transpose();
      const double y = oracle(x);
      xs.push_back(x);
      ys.push_back(y);
    }
  } catch (const std::exception& e) {
    curve.error = std::string("oracle failed on the initial design: ") + e.what();
    return finish();
  }

  detail::Surrogate model(cfg);
  std::uint64_t fits = 0;
  auto checkpoint = [&](bool final) {
    const Dataset data = detail::as_dataset(xs, ys);
    if (final && cfg.final_epochs > 0)
      model.fit(data, cfg.final_epochs, fit_rng.split(fits++));
    else if (cfg.acquisition == Acquisition::random || !model.fitted())
      model.fit(data, cfg.epochs, fit_rng.split(fits++));
    const auto r = model.evaluate(test);
    curve.points.push_back({data.size(), r.rmse, r.rmspe, r.crps_mean, r.coverage90, elapsed()});
  };

  if (cfg.acquisition != Acquisition::random) model.fit(detail::as_dataset(xs, ys), cfg.epochs, fit_rng.split(fits++));
  if (cfg.budget == 0) {
    checkpoint(true);
    return finish();
  }
  checkpoint(false);

  int since_fit = 0;
  for (int t = 1; t <= cfg.budget; ++t) {
    const MatrixXd pool = bench::lhs(cfg.candidate_count, dim, pool_rng);
    VectorXd scores;
    if (cfg.acquisition == Acquisition::random) {
      scores = VectorXd::Zero(pool.rows());
      scores(static_cast<Eigen::Index>(pick_rng.below(static_cast<std::uint64_t>(pool.rows())))) = 1.0;
    } else {
      scores = model.score(pool, score_rng.split(static_cast<std::uint64_t>(t)), curve.crossings);
    }
    if (!cfg.stochastic_oracle) {
      const Dataset data = detail::as_dataset(xs, ys);
      mask_duplicates(scores, pool, data.X, cfg.duplicate_tol);
    }
    const Eigen::Index pick = select_next(scores);
    if (cfg.acquisition != Acquisition::random) curve.score_trace.push_back(scores(pick));
    const VectorXd x = pool.row(pick).transpose();
    try {
      const double y = oracle(x);
      xs.push_back(x);
      ys.push_back(y);
    } catch (const std::exception& e) {
      curve.error = "oracle failed at acquisition " + std::to_string(t) + ": " + e.what();
      return finish();
    }
    const bool last = t == cfg.budget;
    if (cfg.acquisition != Acquisition::random && ++since_fit >= cfg.retrain_every &&
        !(last && cfg.final_epochs > 0)) {
      model.update(detail::as_dataset(xs, ys), fit_rng.split(fits++));
      since_fit = 0;
    }
    if (last || t % cfg.eval_every == 0) checkpoint(last);
  }
  return finish();
}

/// Long-format learning curves: one row per checkpoint and metric. Timings
/// are written as NA when `deterministic` is set.
inline std::string learning_curve_csv(const std::vector<LearningCurve>& curves, const std::string& benchmark,
                                      const std::string& header_comment, bool deterministic) {
  std::ostringstream out;
  out << "# " << header_comment << '\n';
  out << "benchmark,method,replicate,n,metric_name,metric_value,wall_seconds\n";
  for (std::size_t r = 0; r < curves.size(); ++r) {
    const auto& c = curves[r];
    for (const auto& p : c.points) {
      const std::pair<const char*, double> metrics[] = {
          {"rmse", p.rmse}, {"rmspe", p.rmspe}, {"crps", p.crps}, {"coverage90", p.coverage90}};
      for (const auto& [name, v] : metrics) {
        if (!std::isfinite(v)) continue;
        out << benchmark << ',' << to_string(c.acquisition) << ',' << r << ',' << p.n << ',' << name << ','
            << io::format_double(v) << ',' << (deterministic ? std::string("NA") : io::format_double(p.wall_seconds))
            << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace gbc::al
