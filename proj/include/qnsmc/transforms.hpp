#pragma once

#include "qnsmc/math.hpp"

#include <cmath>

namespace qnsmc {

// Stick-breaking map between R^{K-1} and the K-simplex. The break fraction
// for stick k carries an offset log(1/(K-k)) so the origin maps to the
// simplex center.
struct SimplexForwardResult {
  Vector z;             // K entries, positive, sum to 1
  double log_jacobian;  // log |det| of the forward map onto (z_1..z_{K-1})
};

inline SimplexForwardResult simplex_forward(const Eigen::Ref<const Vector>& y) {
  const Eigen::Index km1 = y.size();
  const Eigen::Index k_total = km1 + 1;
  Vector z(k_total);
  double stick = 1.0;
  double log_jac = 0.0;
  for (Eigen::Index k = 0; k < km1; ++k) {
    const double adj = y[k] - std::log(static_cast<double>(k_total - k - 1));
    const double brk = logistic(adj);
    z[k] = stick * brk;
    // log(stick * brk * (1 - brk))
    log_jac += std::log(stick) - log1p_exp(-adj) - log1p_exp(adj);
    stick -= z[k];
  }
  z[k_total - 1] = stick;
  return {std::move(z), log_jac};
}

inline Vector simplex_inverse(const Eigen::Ref<const Vector>& z) {
  const Eigen::Index k_total = z.size();
  Vector y(k_total - 1);
  double stick = 1.0;
  for (Eigen::Index k = 0; k < k_total - 1; ++k) {
    const double brk = z[k] / stick;
    y[k] = std::log(brk / (1.0 - brk)) + std::log(static_cast<double>(k_total - k - 1));
    stick -= z[k];
  }
  return y;
}

// Forward map plus the derivatives the mixture gradient needs.
struct SimplexForwardGrad {
  Vector z;
  double log_jacobian;
  Matrix dz_dy;        // K x (K-1)
  Vector dlogjac_dy;   // K-1
};

inline SimplexForwardGrad simplex_forward_grad(const Eigen::Ref<const Vector>& y) {
  const Eigen::Index km1 = y.size();
  const Eigen::Index k_total = km1 + 1;
  SimplexForwardGrad out;
  out.z.resize(k_total);
  out.dz_dy = Matrix::Zero(k_total, km1);
  out.dlogjac_dy.resize(km1);
  out.log_jacobian = 0.0;

  Vector brk(km1);
  double stick = 1.0;
  for (Eigen::Index k = 0; k < km1; ++k) {
    const double adj = y[k] - std::log(static_cast<double>(k_total - k - 1));
    brk[k] = logistic(adj);
    out.z[k] = stick * brk[k];
    out.log_jacobian += std::log(stick) - log1p_exp(-adj) - log1p_exp(adj);
    stick -= out.z[k];
  }
  out.z[k_total - 1] = stick;

  // d z_k / d y_j: -b_j z_k for j < k (through the remaining stick), plus the
  // direct term stick_k b_k (1-b_k) at j = k.
  for (Eigen::Index k = 0; k < k_total; ++k) {
    for (Eigen::Index j = 0; j < std::min(k, km1); ++j)
      out.dz_dy(k, j) = -brk[j] * out.z[k];
    if (k < km1) {
      double stick_k = 1.0;
      for (Eigen::Index j = 0; j < k; ++j) stick_k -= out.z[j];
      out.dz_dy(k, k) = stick_k * brk[k] * (1.0 - brk[k]);
    }
  }
  for (Eigen::Index j = 0; j < km1; ++j)
    out.dlogjac_dy[j] = 1.0 - static_cast<double>(k_total - j) * brk[j];
  return out;
}

}  // namespace qnsmc
