#pragma once

#include "gbc/core/normal.hpp"
#include "gbc/io/container.hpp"
#include "gbc/io/csv.hpp"
#include "gbc/iqn/predict.hpp"

#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace gbc::run {

inline Eigen::Index model_input_dim(const io::AnyModel& model) {
  return std::visit(
      [](const auto& m) -> Eigen::Index {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, iqn::IqnModel<float>>) return m.net.input_dim();
        else if constexpr (std::is_same_v<T, ensemble::RandomizedPriorEnsemble<float>>)
          return m.members.front().trainable.net.input_dim();
        else if constexpr (std::is_same_v<T, ensemble::SeedEnsemble<float>>) return m.members.front().net.input_dim();
        else if constexpr (std::is_same_v<T, gp::GpModel>) return m.dim();
        else return m.model.net.input_dim() - 1;
      },
      model);
}

/// Quantiles at `levels` per row of X; ensembles pool B stratified levels per member.
inline MatrixXd model_quantiles(const io::AnyModel& model, const MatrixXd& X, const std::vector<double>& levels,
                                int B_per_member = 200) {
  if (X.cols() != model_input_dim(model))
    throw ShapeError("predict: model expects " + std::to_string(model_input_dim(model)) + " inputs, got " +
                     std::to_string(X.cols()));
  return std::visit(
      [&](const auto& m) -> MatrixXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, gp::GpModel>) return gp::gp_quantile_matrix(m, X, levels);
        else if constexpr (std::is_same_v<T, ensemble::RandomizedPriorEnsemble<float>> ||
                           std::is_same_v<T, ensemble::SeedEnsemble<float>>)
          return ensemble::pooled_quantile_matrix(m.members, X, levels, B_per_member);
        else return iqn::quantile_matrix(m, X, levels);
      },
      model);
}

/// B predictive draws per row: a uniform level per draw, pushed through the
/// model's quantile function. Ensemble draw b comes from member b mod K.
inline MatrixXd model_samples(const io::AnyModel& model, const MatrixXd& X, int B, SeededRng rng) {
  if (B < 1) throw ArgumentError("predict: number of samples must be positive");
  if (X.cols() != model_input_dim(model))
    throw ShapeError("predict: model expects " + std::to_string(model_input_dim(model)) + " inputs, got " +
                     std::to_string(X.cols()));
  const Eigen::Index n = X.rows();
  VectorXd taus(n * B);
  for (Eigen::Index i = 0; i < taus.size(); ++i) taus(i) = rng.uniform();
  MatrixXd rep(n * B, X.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int b = 0; b < B; ++b) rep.row(i * B + b) = X.row(i);
  VectorXd draws(n * B);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, gp::GpModel>) {
          const auto p = gp::gp_predict(m, X);
          for (Eigen::Index i = 0; i < n; ++i)
            for (int b = 0; b < B; ++b)
              draws(i * B + b) = p.mean(i) + std::sqrt(p.variance(i)) * normal_quantile(taus(i * B + b));
        } else if constexpr (std::is_same_v<T, ensemble::RandomizedPriorEnsemble<float>> ||
                             std::is_same_v<T, ensemble::SeedEnsemble<float>>) {
          const auto K = static_cast<int>(m.members.size());
          for (int k = 0; k < K; ++k) {
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < n; ++i)
              for (int b = k; b < B; b += K) rows.push_back(i * B + b);
            if (rows.empty()) continue;
            MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), X.cols());
            VectorXd ts(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
              Xs.row(static_cast<Eigen::Index>(r)) = rep.row(rows[r]);
              ts(static_cast<Eigen::Index>(r)) = taus(rows[r]);
            }
            const VectorXd q = m.members[static_cast<std::size_t>(k)].heads(Xs, ts).col(1);
            for (std::size_t r = 0; r < rows.size(); ++r) draws(rows[r]) = q(static_cast<Eigen::Index>(r));
          }
        } else {
          draws = m.heads(rep, taus).col(1);
        }
      },
      model);
  MatrixXd S(n, B);
  for (Eigen::Index i = 0; i < n; ++i) S.row(i) = draws.segment(i * B, B).transpose();
  return S;
}

/// Input columns, then q_<level> columns, then sample_<b> columns.
inline std::string predictions_csv(const std::vector<std::string>& input_names, const MatrixXd& X,
                                   const std::vector<double>& levels, const MatrixXd& Q, const MatrixXd& S,
                                   const std::string& header_comment) {
  std::ostringstream out;
  out << "# " << header_comment << '\n';
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (const auto& nm : input_names) sep(), out << nm;
  for (double l : levels) sep(), out << "q_" << io::format_double(l);
  for (Eigen::Index b = 0; b < S.cols(); ++b) sep(), out << "sample_" << b + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    first = true;
    for (Eigen::Index j = 0; j < X.cols(); ++j) sep(), out << io::format_double(X(i, j));
    for (Eigen::Index j = 0; j < Q.cols(); ++j) sep(), out << io::format_double(Q(i, j));
    for (Eigen::Index j = 0; j < S.cols(); ++j) sep(), out << io::format_double(S(i, j));
    out << '\n';
  }
  return out.str();
}

}  // namespace gbc::run
