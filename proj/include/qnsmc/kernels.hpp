#pragma once

#include "qnsmc/ensemble.hpp"
#include "qnsmc/lbfgs.hpp"
#include "qnsmc/model.hpp"

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

namespace qnsmc {

enum class KernelKind { mala, qn_mala };

enum class InitStrategy { identity, ensemble_diag };

struct KernelState {
  double epsilon = 0.1;   // discretization stepsize (adapted in log space)
  double alpha_star = 0.8;
  double delta = 1.0;     // Robbins-Monro adaptation rate
  int memory = 20;        // L-BFGS window m
  double omega = 1.0;     // positive-definiteness bound
  InitStrategy init_strategy = InitStrategy::identity;
};

struct ProposalOutcome {
  Vector proposed;
  bool accepted = false;
  double accept_prob = 0.0;
  Particle particle;  // moved or duplicated
};

// x - eps grad U + sqrt(2 eps) xi
template <class Rng>
Vector mala_propose(const Vector& x, const Vector& grad_u, double epsilon, Rng& rng) {
  const Vector xi = rng.normal_vector(x.size());
  return x - epsilon * grad_u + std::sqrt(2.0 * epsilon) * xi;
}

// log N(x_to | x_from - eps grad U(x_from), 2 eps I)
inline double mala_log_density(const Vector& x_to, const Vector& x_from,
                               const Vector& grad_u_from, double epsilon) {
  const auto d = static_cast<double>(x_to.size());
  const Vector diff = x_to - (x_from - epsilon * grad_u_from);
  return -0.5 * d * std::log(4.0 * M_PI * epsilon) - diff.squaredNorm() / (4.0 * epsilon);
}

// x - eps S S^T grad U + sqrt(2 eps) S xi; drift and noise go through the
// factor chains, no d x d matrix is ever formed.
template <class Rng>
Vector qn_propose(const Vector& x, const Vector& grad_u, const LbfgsFactors& f,
                  double epsilon, Rng& rng) {
  const Vector xi = rng.normal_vector(x.size());
  return x - epsilon * f.apply_B_inv(grad_u) + std::sqrt(2.0 * epsilon) * f.apply_S(xi);
}

// log N(x_to | x_from - eps Sigma grad U, 2 eps Sigma) with Sigma = B^-1 from
// the factors: quadratic form via ||C^T (x_to - mean)||^2, log-determinant
// from the factor build.
inline double qn_log_density(const Vector& x_to, const Vector& x_from,
                             const Vector& grad_u_from, const LbfgsFactors& f,
                             double epsilon) {
  const auto d = static_cast<double>(x_to.size());
  const Vector diff = x_to - (x_from - epsilon * f.apply_B_inv(grad_u_from));
  return -0.5 * d * std::log(4.0 * M_PI * epsilon) + 0.5 * f.log_det_B -
         f.apply_C_T(diff).squaredNorm() / (4.0 * epsilon);
}

// log eps <- log eps + delta (mean_accept - alpha_star)
inline double adapt_stepsize(double epsilon, double mean_accept, const KernelState& state) {
  return std::exp(std::log(epsilon) + state.delta * (mean_accept - state.alpha_star));
}

// Displacement / gradient-difference pairs from a trajectory window, with the
// gradient difference re-formed at the requested lambda. Zero-displacement
// entries contribute no pair.
inline std::vector<Pair> pairs_from_history(const std::deque<HistoryEntry>& history,
                                            double lambda) {
  std::vector<Pair> pairs;
  if (history.size() < 2) return pairs;
  pairs.reserve(history.size() - 1);
  for (std::size_t j = 0; j + 1 < history.size(); ++j) {
    const HistoryEntry& a = history[j];
    const HistoryEntry& b = history[j + 1];
    Vector s = b.point - a.point;
    if (s.squaredNorm() == 0.0) continue;
    Vector y = -(b.grad_log_prior - a.grad_log_prior);
    if (lambda != 0.0) y -= lambda * (b.grad_log_lik - a.grad_log_lik);
    pairs.push_back({std::move(s), std::move(y)});
  }
  return pairs;
}

// One Metropolis-Hastings step at temperature lambda. Exactly one model
// evaluation. The quasi-Newton branch freezes the trajectory preconditioner
// for both the forward and reverse densities, so their normalization and
// log-determinant terms cancel and only the quadratic forms enter the ratio.
template <class Rng>
ProposalOutcome mh_step(const Particle& particle, const TemperedModel& model,
                        double lambda, KernelKind kind, const KernelState& state,
                        const DiagInit& init, Rng& rng) {
  const Vector& x = particle.point;
  const double eps = state.epsilon;
  const double u_cur = tempered_potential(particle.eval, lambda);
  const Vector g_cur = tempered_gradient(particle.eval, lambda);

  std::optional<LbfgsFactors> f;
  if (kind == KernelKind::qn_mala)
    f = build_factors(pairs_from_history(particle.history, lambda), init, state.omega);

  const Vector xi = rng.normal_vector(x.size());
  const Vector drift = f ? f->apply_B_inv(g_cur) : g_cur;
  const Vector noise = f ? f->apply_S(xi) : xi;
  const Vector proposed = x - eps * drift + std::sqrt(2.0 * eps) * noise;

  const Evaluation ev_prop = model.evaluate(proposed);
  const double u_prop = tempered_potential(ev_prop, lambda);

  double accept_prob = 0.0;
  if (std::isfinite(u_prop) && ev_prop.grad_log_prior.allFinite() &&
      ev_prop.grad_log_lik.allFinite()) {
    const Vector g_prop = tempered_gradient(ev_prop, lambda);
    const Vector drift_prop = f ? f->apply_B_inv(g_prop) : g_prop;
    const Vector fwd_diff = proposed - (x - eps * drift);
    const Vector rev_diff = x - (proposed - eps * drift_prop);
    const double fwd_quad =
        f ? f->apply_C_T(fwd_diff).squaredNorm() : fwd_diff.squaredNorm();
    const double rev_quad =
        f ? f->apply_C_T(rev_diff).squaredNorm() : rev_diff.squaredNorm();
    const double log_alpha = (u_cur - u_prop) + (fwd_quad - rev_quad) / (4.0 * eps);
    if (!std::isnan(log_alpha)) accept_prob = std::min(1.0, std::exp(log_alpha));
  }

  ProposalOutcome out;
  out.proposed = proposed;
  out.accept_prob = accept_prob;
  out.accepted = rng.uniform() < accept_prob;
  if (out.accepted) {
    out.particle.point = proposed;
    out.particle.eval = ev_prop;
    out.particle.history = particle.history;
    append_history(out.particle, static_cast<std::size_t>(state.memory) + 1);
  } else {
    out.particle = particle;  // duplicate; history unchanged
  }
  return out;
}

}  // namespace qnsmc
