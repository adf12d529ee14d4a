#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gbc {

/// Row-major dense matrix; rows are samples, columns are features.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// Error hierarchy. Every failure the library reports derives from gbc::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};
struct OptimizerError : Error {
  using Error::Error;
};
struct ConditioningError : Error {
  using Error::Error;
};
struct IngestionError : Error {
  using Error::Error;
};
struct AcquisitionError : Error {
  using Error::Error;
};

struct TrainingDiverged : Error {
  TrainingDiverged(int epoch_index, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch_index) + ": " + what),
        epoch(epoch_index) {}
  int epoch;
};

struct DegenerateFit : Error {
  using Error::Error;
};

/// Failure while building an ensemble; `member` is the 0-based member index.
struct EnsembleError : Error {
  EnsembleError(int member_index, const std::string& what)
      : Error("ensemble member " + std::to_string(member_index) + ": " + what), member(member_index) {}
  int member;
};

inline void require_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace gbc
