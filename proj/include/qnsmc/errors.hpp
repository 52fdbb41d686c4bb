#pragma once

#include <stdexcept>
#include <string>

namespace qnsmc {

struct SmcError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All weights zero / underflowed to zero.
struct DegenerateWeightsError : SmcError {
  using SmcError::SmcError;
};

// Non-finite gradients on an evaluation whose log-densities are finite.
struct EvaluationError : SmcError {
  using SmcError::SmcError;
};

// Bisection ran out of iterations before meeting its tolerance.
struct BisectionError : SmcError {
  BisectionError(const std::string& msg, double best)
      : SmcError(msg), best_lambda(best) {}
  double best_lambda;
};

// Curvature product went non-positive while building square-root factors.
struct FactorBuildError : SmcError {
  using SmcError::SmcError;
};

struct MatrixDecompositionError : SmcError {
  using SmcError::SmcError;
};

struct DataLoadError : SmcError {
  using SmcError::SmcError;
};

struct UsageError : SmcError {
  using SmcError::SmcError;
};

}  // namespace qnsmc
