#pragma once

#include "qnsmc/ensemble.hpp"
#include "qnsmc/errors.hpp"
#include "qnsmc/math.hpp"

#include <cmath>
#include <string>

namespace qnsmc {

struct TemperConfig {
  double rho = 0.95;          // ESS decay target per iteration
  double bisect_tol = 1e-4;   // relative tolerance on |ESS(lambda) - target|
  int max_bisect_iters = 100;
};

// Solve ESS(lambda) ~= target_ess for lambda in (lambda_prev, 1] by bisection
// on the incremental weights w_i exp((lambda - lambda_prev) ll_i). Works
// entirely from the cached log-likelihoods: no model evaluations. If the ESS
// at lambda = 1 is already above target, returns 1 (clamp). When the target is
// unreachable even arbitrarily close to lambda_prev (e.g. target_ess = N with
// distinct log-likelihoods) the bracket collapses to machine resolution and
// the lower-edge iterate is returned, still strictly above lambda_prev.
inline double solve_next_lambda(const Eigen::Ref<const Vector>& log_liks,
                                const Eigen::Ref<const Vector>& weights,
                                double lambda_prev, const TemperConfig& cfg,
                                double target_ess) {
  if (!(lambda_prev >= 0.0) || lambda_prev >= 1.0)
    throw SmcError("solve_next_lambda: lambda_prev must lie in [0,1)");
  if (!(target_ess >= 1.0))
    throw SmcError("solve_next_lambda: target_ess must be >= 1");

  const Vector log_w = weights.array().log();
  const auto ess_at = [&](double lam) {
    return ess_log(log_w + (lam - lambda_prev) * log_liks);
  };

  if (ess_at(1.0) >= target_ess) return 1.0;

  double lo = lambda_prev;
  double hi = 1.0;
  double mid = hi;
  for (int it = 0; it < cfg.max_bisect_iters; ++it) {
    mid = 0.5 * (lo + hi);
    const double e = ess_at(mid);
    if (std::abs(e - target_ess) <= cfg.bisect_tol * target_ess) return mid;
    if (e > target_ess)
      lo = mid;
    else
      hi = mid;
  }
  // Bracket at floating-point resolution: the ESS jump across one ulp exceeds
  // the tolerance, so return the upper edge (strictly above lambda_prev).
  if (hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi)))
    return hi;
  throw BisectionError("solve_next_lambda: bisection did not converge in " +
                           std::to_string(cfg.max_bisect_iters) + " iterations",
                       mid);
}

}  // namespace qnsmc
