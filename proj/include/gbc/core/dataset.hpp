#pragma once

#include "gbc/core/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gbc {

/// Inputs X (n x d) and responses y (n), plus optional generator metadata.
///
/// `truth` holds the noiseless response when a generator knows it, and
/// `regime` holds binary regime labels for piecewise generators.
struct Dataset {
  MatrixXd X;
  VectorXd y;
  std::optional<VectorXd> truth;
  std::optional<std::vector<int>> regime;
  std::vector<std::string> input_names;
  std::string response_name = "y";
  std::string provenance;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }

  void validate() const {
    if (X.rows() != y.size())
      throw ShapeError("Dataset: X has " + std::to_string(X.rows()) + " rows but y has " +
                       std::to_string(y.size()) + " entries");
    if (truth && truth->size() != y.size()) throw ShapeError("Dataset: truth length mismatch");
    if (regime && static_cast<Eigen::Index>(regime->size()) != y.size())
      throw ShapeError("Dataset: regime length mismatch");
    if (!X.allFinite()) throw DomainError("Dataset: non-finite input");
  }

  /// Rows selected by `idx`, metadata carried along.
  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    if (truth) out.truth = VectorXd(static_cast<Eigen::Index>(idx.size()));
    if (regime) out.regime = std::vector<int>(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(idx[k]);
      const auto r = static_cast<Eigen::Index>(k);
      out.X.row(r) = X.row(i);
      out.y(r) = y(i);
      if (truth) (*out.truth)(r) = (*truth)(i);
      if (regime) (*out.regime)[k] = (*regime)[idx[k]];
    }
    out.input_names = input_names;
    out.response_name = response_name;
    out.provenance = provenance;
    return out;
  }

  std::vector<std::string> column_names() const {
    if (!input_names.empty()) return input_names;
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
  }
};

/// Per-dimension min-max input scaling to [0,1] and z-scoring of responses.
struct Standardizer {
  VectorXd x_lo;
  VectorXd x_span;
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Standardizer identity(Eigen::Index d) {
    return {VectorXd::Zero(d), VectorXd::Ones(d), 0.0, 1.0};
  }

  static Standardizer fit(const MatrixXd& X, const VectorXd& y) {
    Standardizer s;
    s.x_lo = X.colwise().minCoeff().transpose();
    s.x_span = (X.colwise().maxCoeff().transpose() - s.x_lo);
    for (Eigen::Index j = 0; j < s.x_span.size(); ++j)
      if (!(s.x_span(j) > 0.0)) s.x_span(j) = 1.0;
    s.y_mean = y.mean();
    const double var = (y.array() - s.y_mean).square().sum() / std::max<Eigen::Index>(y.size() - 1, 1);
    s.y_scale = var > 0.0 ? std::sqrt(var) : 1.0;
    return s;
  }

  template <typename Scalar>
  Matrix<Scalar> transform_x(const MatrixXd& X) const {
    if (X.cols() != x_lo.size())
      throw ShapeError("Standardizer: input width " + std::to_string(X.cols()) + " != " +
                       std::to_string(x_lo.size()));
    MatrixXd z = (X.rowwise() - x_lo.transpose()).array().rowwise() / x_span.transpose().array();
    return z.template cast<Scalar>();
  }

  double transform_y(double v) const { return (v - y_mean) / y_scale; }
  double inverse_y(double v) const { return v * y_scale + y_mean; }
};

}  // namespace gbc
