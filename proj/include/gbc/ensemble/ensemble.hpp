#pragma once

#include "gbc/core/dataset.hpp"
#include "gbc/core/parallel.hpp"
#include "gbc/core/rng.hpp"
#include "gbc/core/stats.hpp"
#include "gbc/iqn/model.hpp"
#include "gbc/iqn/predict.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gbc::ensemble {

/// Trainable IQN plus a frozen random network of the same shape; both heads
/// are g(tau, x) + alpha * g0(tau, x) in the trainable model's working units.
template <typename Scalar = float>
struct RandomizedPriorMember {
  iqn::IqnModel<Scalar> trainable;
  iqn::IqnNetwork<Scalar> prior;
  double alpha = 0.5;

  MatrixXd heads(const MatrixXd& X, const VectorXd& taus) const {
    return iqn::detail::chunked_heads<Scalar>(
        trainable.scaler, X, taus,
        [&](const Matrix<Scalar>& xn, const Vector<Scalar>& t) { return rp_forward(*this, xn, t); });
  }
};

/// Composite forward in working units (n x 2: mu, q).
template <typename Scalar>
Matrix<Scalar> rp_forward(const RandomizedPriorMember<Scalar>& m, const Matrix<Scalar>& xn,
                          const Vector<Scalar>& taus) {
  Matrix<Scalar> out = iqn::detail::eval_network(m.trainable.net, xn, taus);
  if (m.alpha != 0.0)
    out += static_cast<Scalar>(m.alpha) * iqn::detail::eval_network(m.prior, xn, taus);
  return out;
}

template <typename Scalar = float>
struct RandomizedPriorEnsemble {
  std::vector<RandomizedPriorMember<Scalar>> members;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> member_seeds;

  std::size_t size() const { return members.size(); }
};

struct EnsembleOptions {
  int K = 3;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  /// Overrides the per-member streams (default: split(seed, k)).
  std::optional<std::vector<std::uint64_t>> member_seeds;
  int jobs = 1;
};

/// Trains one member: init from stream 0, prior from stream 2, loop on stream 1.
template <typename Scalar = float>
RandomizedPriorMember<Scalar> train_member(const Dataset& data, iqn::IqnConfig config, double alpha,
                                           const SeededRng& rng) {
  data.validate();
  if (data.size() < 2) throw ArgumentError("train_member: need at least 2 observations");
  config.input_dim = static_cast<int>(data.dim());
  config.validate();
  RandomizedPriorMember<Scalar> m;
  m.alpha = alpha;
  m.trainable.config = config;
  m.trainable.scaler = config.standardize ? Standardizer::fit(data.X, data.y)
                                          : Standardizer::identity(data.dim());
  auto init_rng = rng.split(0);
  auto prior_rng = rng.split(2);
  m.trainable.net =
      iqn::IqnNetwork<Scalar>::init(data.dim(), config.hidden_width, config.embed_dim, init_rng);
  m.prior = iqn::IqnNetwork<Scalar>::init(data.dim(), config.hidden_width, config.embed_dim, prior_rng);

  const Matrix<Scalar> Xn = m.trainable.scaler.template transform_x<Scalar>(data.X);
  Vector<Scalar> yn(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    yn(i) = static_cast<Scalar>(m.trainable.scaler.transform_y(data.y(i)));
  auto loop_rng = rng.split(1);
  const iqn::OutputOffset<Scalar> offset{&m.prior, static_cast<Scalar>(alpha)};
  m.trainable.loss_history = iqn::fit_network(m.trainable.net, Xn, yn, config, loop_rng, offset);
  return m;
}

/// Warm start: continues a member's trainable network, prior unchanged.
template <typename Scalar>
void continue_member(RandomizedPriorMember<Scalar>& m, const Dataset& data, int epochs, SeededRng& rng) {
  const iqn::OutputOffset<Scalar> offset{&m.prior, static_cast<Scalar>(m.alpha)};
  iqn::continue_training(m.trainable, data, epochs, rng, offset);
}

template <typename Scalar = float>
RandomizedPriorEnsemble<Scalar> train_ensemble(const Dataset& data, const iqn::IqnConfig& config,
                                               const EnsembleOptions& opt) {
  if (opt.K < 2) throw ArgumentError("train_ensemble: K must be >= 2");
  if (opt.alpha < 0.0) throw ArgumentError("train_ensemble: alpha must be >= 0");
  RandomizedPriorEnsemble<Scalar> ens;
  ens.alpha = opt.alpha;
  ens.seed = opt.seed;
  if (opt.member_seeds) {
    if (static_cast<int>(opt.member_seeds->size()) != opt.K)
      throw ArgumentError("train_ensemble: need one member seed per member");
    ens.member_seeds = *opt.member_seeds;
  } else {
    const SeededRng master(opt.seed);
    for (int k = 0; k < opt.K; ++k) ens.member_seeds.push_back(master.split(static_cast<std::uint64_t>(k)).seed());
  }
  ens.members.resize(static_cast<std::size_t>(opt.K));
  parallel_for(static_cast<std::size_t>(opt.K), opt.jobs, [&](std::size_t k) {
    try {
      ens.members[k] = train_member<Scalar>(data, config, opt.alpha, SeededRng(ens.member_seeds[k]));
    } catch (const Error& e) {
      throw EnsembleError(static_cast<int>(k), e.what());
    }
  });
  return ens;
}

/// Median of B composite quantile-head draws at x.
template <iqn::HeadModel M>
double member_median(const M& member, const VectorXd& x, int B, SeededRng& rng) {
  return median(iqn::sample_predictive(member, x, B, rng).values);
}

/// Sample standard deviation (K - 1 denominator) of member medians.
inline double disagreement_from_medians(const VectorXd& medians) {
  if (medians.size() < 2) throw ArgumentError("disagreement needs at least 2 members");
  return sample_sd(medians);
}

template <typename Scalar>
VectorXd disagreement_batch(const RandomizedPriorEnsemble<Scalar>& ens, const MatrixXd& Xc, int B,
                            const SeededRng& rng, int jobs = 1);

/// a(x) from B levels drawn once and shared by every member (common random
/// numbers), so identical members give exactly zero.
template <typename Scalar>
double disagreement(const RandomizedPriorEnsemble<Scalar>& ens, const VectorXd& x, int B, SeededRng& rng) {
  return disagreement_batch(ens, MatrixXd(x.transpose()), B, rng.split(rng.next_u64()))(0);
}

/// Disagreement at every row of Xc. Levels come from `rng` candidate by
/// candidate and are shared across members; results do not depend on `jobs`.
template <typename Scalar>
VectorXd disagreement_batch(const RandomizedPriorEnsemble<Scalar>& ens, const MatrixXd& Xc, int B,
                            const SeededRng& rng, int jobs) {
  if (B < 1) throw ArgumentError("disagreement: B must be >= 1");
  const Eigen::Index n = Xc.rows();
  const auto K = static_cast<Eigen::Index>(ens.size());
  if (K < 2) throw ArgumentError("disagreement needs at least 2 members");
  MatrixXd rep(n * B, Xc.cols());
  VectorXd taus(n * B);
  SeededRng r = rng;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int b = 0; b < B; ++b) {
      rep.row(i * B + b) = Xc.row(i);
      taus(i * B + b) = r.uniform();
    }
  MatrixXd med(n, K);
  parallel_for(static_cast<std::size_t>(K), jobs, [&](std::size_t k) {
    const VectorXd q = ens.members[k].heads(rep, taus).col(1);
    for (Eigen::Index i = 0; i < n; ++i)
      med(i, static_cast<Eigen::Index>(k)) = median(q.segment(i * B, B));
  });
  VectorXd a(n);
  for (Eigen::Index i = 0; i < n; ++i) a(i) = disagreement_from_medians(med.row(i).transpose());
  return a;
}

/// Member sample sets concatenated in member order.
template <iqn::HeadModel M>
iqn::PredictiveSamples pooled_samples(const std::vector<M>& members, const VectorXd& x, int B_per_member,
                                      SeededRng& rng) {
  if (members.empty()) throw ArgumentError("pooled_samples: no members");
  iqn::PredictiveSamples out;
  out.input = x;
  const auto total = static_cast<Eigen::Index>(members.size()) * B_per_member;
  out.values.resize(total);
  out.taus.resize(total);
  Eigen::Index at = 0;
  for (const auto& m : members) {
    const auto s = iqn::sample_predictive(m, x, B_per_member, rng);
    out.values.segment(at, B_per_member) = s.values;
    out.taus.segment(at, B_per_member) = s.taus;
    at += B_per_member;
  }
  return out;
}

template <typename Scalar>
iqn::PredictiveSamples pooled_samples(const RandomizedPriorEnsemble<Scalar>& ens, const VectorXd& x,
                                      int B_per_member, SeededRng& rng) {
  return pooled_samples(ens.members, x, B_per_member, rng);
}

/// Unbiased Monte Carlo variance of predictive draws.
inline double predictive_variance(const iqn::PredictiveSamples& s) {
  if (s.size() < 2) throw ArgumentError("predictive_variance: need B >= 2");
  return sample_variance(s.values);
}

/// Ensemble of independently seeded plain IQNs (no prior term).
template <typename Scalar = float>
struct SeedEnsemble {
  std::vector<iqn::IqnModel<Scalar>> members;
  std::vector<std::uint64_t> member_seeds;

  std::size_t size() const { return members.size(); }
};

template <typename Scalar = float>
SeedEnsemble<Scalar> train_seed_ensemble(const Dataset& data, const iqn::IqnConfig& config, int K,
                                         std::uint64_t seed, int jobs = 1) {
  if (K < 1) throw ArgumentError("train_seed_ensemble: K must be >= 1");
  SeedEnsemble<Scalar> ens;
  const SeededRng master(seed);
  for (int k = 0; k < K; ++k) ens.member_seeds.push_back(master.split(static_cast<std::uint64_t>(k)).seed());
  ens.members.resize(static_cast<std::size_t>(K));
  parallel_for(static_cast<std::size_t>(K), jobs, [&](std::size_t k) {
    try {
      ens.members[k] = iqn::train<Scalar>(data, config, SeededRng(ens.member_seeds[k]));
    } catch (const Error& e) {
      throw EnsembleError(static_cast<int>(k), e.what());
    }
  });
  return ens;
}

/// Quantiles of the equal-weight mixture of members at `levels`.
///
/// Each member contributes its quantile head on the stratified grid
/// m / (B + 1), m = 1..B; the pooled K*B values are treated as draws from the
/// mixture and read off at plotting positions p (N + 1). Deterministic.
template <iqn::HeadModel M>
MatrixXd pooled_quantile_matrix(const std::vector<M>& members, const MatrixXd& X,
                                const std::vector<double>& levels, int B_per_member = 200) {
  if (members.empty()) throw ArgumentError("pooled quantiles: no members");
  iqn::check_levels(levels);
  const auto grid = iqn::quantile_grid(B_per_member);
  std::vector<MatrixXd> per;
  per.reserve(members.size());
  for (const auto& m : members) per.push_back(iqn::quantile_matrix(m, X, grid));
  MatrixXd Q(X.rows(), static_cast<Eigen::Index>(levels.size()));
  std::vector<double> pool;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    pool.clear();
    for (const auto& P : per)
      for (Eigen::Index j = 0; j < P.cols(); ++j) pool.push_back(P(i, j));
    std::sort(pool.begin(), pool.end());
    for (std::size_t l = 0; l < levels.size(); ++l)
      Q(i, static_cast<Eigen::Index>(l)) = grid_quantile(pool, levels[l]);
  }
  return Q;
}

}  // namespace gbc::ensemble
