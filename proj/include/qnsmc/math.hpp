#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace qnsmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(v_i)) with max-shift so that huge negative log-weights do not
// underflow. Returns -inf for an empty or all--inf input.
inline double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  const double s = (v.array() - m).exp().sum();
  return m + std::log(s);
}

inline double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// log(1 + exp(a)) without overflow for large |a|
inline double log1p_exp(double a) {
  if (a > 0.0) return a + std::log1p(std::exp(-a));
  return std::log1p(std::exp(a));
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
}

}  // namespace qnsmc
