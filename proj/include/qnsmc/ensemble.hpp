#pragma once

#include "qnsmc/errors.hpp"
#include "qnsmc/math.hpp"
#include "qnsmc/model.hpp"
#include "qnsmc/rng.hpp"

#include <Eigen/Cholesky>

#include <deque>
#include <utility>
#include <vector>

namespace qnsmc {

// One trajectory point: position plus the gradient components needed to
// re-form grad U at any lambda.
struct HistoryEntry {
  Vector point;
  Vector grad_log_prior;
  Vector grad_log_lik;
};

struct Particle {
  Vector point;
  Evaluation eval;  // cached at point
  std::deque<HistoryEntry> history;
};

// Append the particle's current state to its trajectory window, keeping at
// most `capacity` entries (the L-BFGS window needs m+1 points).
inline void append_history(Particle& p, std::size_t capacity) {
  p.history.push_back({p.point, p.eval.grad_log_prior, p.eval.grad_log_lik});
  while (p.history.size() > capacity) p.history.pop_front();
}

struct Ensemble {
  std::vector<Particle> particles;
  Vector weights;             // normalized, linear scale
  double log_evidence = 0.0;  // running log Z-hat
  double lambda = 0.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(particles.size()); }

  Vector log_liks() const {
    Vector ll(size());
    for (Eigen::Index i = 0; i < size(); ++i) ll[i] = particles[i].eval.log_lik;
    return ll;
  }
};

// (sum w)^2 / sum w^2, in [1, N]; invariant to rescaling the weights.
inline double ess(const Eigen::Ref<const Vector>& weights) {
  const double sum = weights.sum();
  if (!(sum > 0.0) || (weights.array() < 0.0).any())
    throw DegenerateWeightsError("ess: weights must be nonnegative with positive sum");
  const double sum_sq = weights.squaredNorm();
  return sum * sum / sum_sq;
}

// ESS from log-scale weights: exp(2 lse(w) - lse(2w)).
inline double ess_log(const Eigen::Ref<const Vector>& log_weights) {
  const double l1 = log_sum_exp(log_weights);
  if (!std::isfinite(l1))
    throw DegenerateWeightsError("ess_log: all weights are zero");
  const double l2 = log_sum_exp(2.0 * log_weights);
  return std::exp(2.0 * l1 - l2);
}

// Core of the tempering reweight: log w_i <- log w_i + dlambda * ll_i,
// normalized. Returns the log normalizer (evidence increment when the input
// weights sum to one).
inline std::pair<Vector, double> reweight_log(const Eigen::Ref<const Vector>& log_weights,
                                              const Eigen::Ref<const Vector>& log_liks,
                                              double dlambda) {
  Vector lw = log_weights + dlambda * log_liks;
  const double log_norm = log_sum_exp(lw);
  if (!std::isfinite(log_norm))
    throw DegenerateWeightsError("reweight: all weights underflowed to zero");
  lw.array() -= log_norm;
  return {std::move(lw), log_norm};
}

// Advance the ensemble to lambda_new; returns the log-evidence increment.
inline double reweight(Ensemble& ens, double lambda_new) {
  if (!(lambda_new > ens.lambda) || lambda_new > 1.0)
    throw SmcError("reweight: lambda_new must lie in (lambda, 1]");
  auto [lw, inc] = reweight_log(ens.weights.array().log().matrix(), ens.log_liks(),
                                lambda_new - ens.lambda);
  ens.weights = lw.array().exp();
  ens.weights /= ens.weights.sum();
  ens.log_evidence += inc;
  ens.lambda = lambda_new;
  return inc;
}

// N iid draws with replacement by weight; whole particles (including their
// trajectory windows) are copied and weights reset to 1/N. Evidence and
// lambda are untouched.
inline void multinomial_resample(Ensemble& ens, RngStream& rng) {
  const Eigen::Index n = ens.size();
  Vector cum(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += ens.weights[i];
    cum[i] = acc;
  }
  cum[n - 1] = 1.0;  // guard against rounding at the top

  std::vector<Particle> drawn;
  drawn.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double* it = std::lower_bound(cum.data(), cum.data() + n, u);
    auto idx = static_cast<Eigen::Index>(it - cum.data());
    if (idx >= n) idx = n - 1;
    drawn.push_back(ens.particles[idx]);
  }
  ens.particles = std::move(drawn);
  ens.weights.setConstant(n, 1.0 / static_cast<double>(n));
}

// Weighted mean and covariance (no small-sample correction).
inline std::pair<Vector, Matrix> weighted_moments(const Ensemble& ens) {
  const Eigen::Index n = ens.size();
  const Eigen::Index d = ens.particles.front().point.size();
  Vector mean = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += ens.weights[i] * ens.particles[i].point;
  Matrix cov = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector c = ens.particles[i].point - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c, ens.weights[i]);
  }
  cov.triangularView<Eigen::Upper>() = cov.transpose();
  return {std::move(mean), std::move(cov)};
}

// Weighted per-coordinate variance only; used for the diagonal Hessian init.
inline Vector weighted_diag_variance(const Ensemble& ens) {
  const Eigen::Index n = ens.size();
  const Eigen::Index d = ens.particles.front().point.size();
  Vector mean = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += ens.weights[i] * ens.particles[i].point;
  Vector var = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i)
    var += ens.weights[i] * (ens.particles[i].point - mean).array().square().matrix();
  return var;
}

// KL( N(m1,C1) || N(m2,C2) ), closed form.
inline double gaussian_kl(const Vector& m1, const Matrix& c1, const Vector& m2,
                          const Matrix& c2) {
  const auto d = static_cast<double>(m1.size());
  Eigen::LLT<Matrix> llt2(c2);
  if (llt2.info() != Eigen::Success)
    throw MatrixDecompositionError("gaussian_kl: second covariance not positive definite");
  Eigen::LLT<Matrix> llt1(c1);
  if (llt1.info() != Eigen::Success)
    throw MatrixDecompositionError("gaussian_kl: first covariance not positive definite");

  const double log_det1 = 2.0 * llt1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_det2 = 2.0 * llt2.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double trace_term = llt2.solve(c1).trace();
  const Vector diff = m2 - m1;
  const double quad = diff.dot(llt2.solve(diff));
  return 0.5 * (trace_term + quad - d + log_det2 - log_det1);
}

}  // namespace qnsmc
