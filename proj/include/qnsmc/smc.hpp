#pragma once

#include "qnsmc/ensemble.hpp"
#include "qnsmc/kernels.hpp"
#include "qnsmc/model.hpp"
#include "qnsmc/parallel.hpp"
#include "qnsmc/rng.hpp"
#include "qnsmc/tempering.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace qnsmc {

struct SmcConfig {
  int n_particles = 1000;
  double rho = 0.95;    // ESS decay target
  double kappa = 0.5;   // resample when ESS < kappa N
  KernelKind kernel = KernelKind::mala;
  KernelState kernel_state{};
  TemperConfig temper{};
  std::uint64_t seed = 0;
  int max_iters = 100000;  // safety cap
  int mcmc_repeats = 1;    // MCMC steps per particle per iteration
  int threads = 0;         // 0 = all hardware threads

  void validate() const {
    if (n_particles < 2) throw SmcError("config: n_particles must be >= 2");
    if (!(rho > 0.0 && rho < 1.0)) throw SmcError("config: rho must lie in (0,1)");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw SmcError("config: kappa must lie in (0,1]");
    if (!(kernel_state.epsilon > 0.0)) throw SmcError("config: epsilon must be positive");
    if (!(kernel_state.omega > 0.0)) throw SmcError("config: omega must be positive");
    if (kernel_state.memory < 0) throw SmcError("config: memory must be nonnegative");
    if (max_iters < 1) throw SmcError("config: max_iters must be positive");
    if (mcmc_repeats < 1) throw SmcError("config: mcmc_repeats must be positive");
  }
};

struct IterationRecord {
  int t = 0;
  double lambda = 0.0;
  double ess_before = 0.0;  // ESS entering the iteration (t = 0: ESS of w_0)
  bool resampled = false;
  double mean_accept = 0.0;
  double epsilon = 0.0;  // stepsize used for this iteration's moves
  double log_z_inc = 0.0;
  double log_z_cum = 0.0;
};

enum class RunStatus { ok, max_iters_exceeded, tempering_failed };

struct RunTrace {
  std::vector<IterationRecord> records;  // record 0 is the initialization
  Ensemble final_ensemble;
  RunStatus status = RunStatus::ok;
  std::string message;
  std::uint64_t total_evaluations = 0;

  // iterations beyond initialization
  int iterations() const { return static_cast<int>(records.size()) - 1; }
};

using PriorSampler = std::function<Vector(RngStream&)>;

// Algorithm steps 1-4: prior draws, lambda_0 with ESS(lambda_0) ~ rho N,
// first normalizer and weights.
inline Ensemble initialise(const TemperedModel& model, const PriorSampler& prior_sampler,
                           const SmcConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = cfg.n_particles;
  Ensemble ens;
  ens.particles.resize(n);
  parallel_for(n, cfg.threads, [&](Eigen::Index i) {
    RngStream rng = RngStream::derived(cfg.seed, StreamTag::prior, 0, i);
    Particle& p = ens.particles[i];
    p.point = prior_sampler(rng);
    p.eval = model.evaluate(p.point);
    append_history(p, static_cast<std::size_t>(cfg.kernel_state.memory) + 1);
  });

  const Vector log_liks = ens.log_liks();
  const Vector uniform = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double lambda0 = solve_next_lambda(log_liks, uniform, 0.0, cfg.temper,
                                           cfg.rho * static_cast<double>(n));

  // log Z_0 = lse(lambda_0 ll) - log N; weights proportional to exp(lambda_0 ll)
  Vector lw = lambda0 * log_liks;
  const double log_z0 = log_sum_exp(lw) - std::log(static_cast<double>(n));
  if (!std::isfinite(log_z0))
    throw DegenerateWeightsError(
        "initialise: degenerate initial weights; increase n_particles or decrease rho");
  lw.array() -= log_sum_exp(lw);
  ens.weights = lw.array().exp();
  ens.weights /= ens.weights.sum();
  ens.log_evidence = log_z0;
  ens.lambda = lambda0;
  return ens;
}

// Diagonal of B_{t-m} for the move phase under the chosen strategy.
inline DiagInit diag_init_for(const Ensemble& ens, InitStrategy strategy) {
  const Eigen::Index d = ens.particles.front().point.size();
  if (strategy == InitStrategy::identity) return DiagInit::identity(d);
  Vector var = weighted_diag_variance(ens);
  return {var.array().max(1e-8).inverse().matrix()};
}

// Algorithm steps 7-18 for one iteration: conditional resample, one MH move
// per particle at the current temperature, solve the next lambda, reweight
// (accumulating evidence), adapt the stepsize.
inline IterationRecord smc_step(Ensemble& ens, const TemperedModel& model,
                                const SmcConfig& cfg, KernelState& kernel_state, int t) {
  if (!(ens.lambda < 1.0)) throw SmcError("smc_step: ensemble already at lambda = 1");
  const Eigen::Index n = ens.size();

  IterationRecord rec;
  rec.t = t;
  rec.epsilon = kernel_state.epsilon;
  rec.ess_before = ess(ens.weights);
  rec.resampled = rec.ess_before < cfg.kappa * static_cast<double>(n);
  if (rec.resampled) {
    RngStream rng = RngStream::derived(cfg.seed, StreamTag::resample, t, 0);
    multinomial_resample(ens, rng);
  }

  const DiagInit init = diag_init_for(ens, kernel_state.init_strategy);
  Vector accept(n);
  parallel_for(n, cfg.threads, [&](Eigen::Index i) {
    RngStream rng = RngStream::derived(cfg.seed, StreamTag::move, t, i);
    double acc = 0.0;
    for (int rep = 0; rep < cfg.mcmc_repeats; ++rep) {
      ProposalOutcome out = mh_step(ens.particles[i], model, ens.lambda, cfg.kernel,
                                    kernel_state, init, rng);
      ens.particles[i] = std::move(out.particle);
      acc += out.accept_prob;
    }
    accept[i] = acc / cfg.mcmc_repeats;
  });
  rec.mean_accept = accept.mean();

  const double target_ess = cfg.rho * ess(ens.weights);
  const double lambda_next = solve_next_lambda(ens.log_liks(), ens.weights, ens.lambda,
                                               cfg.temper, target_ess);
  rec.log_z_inc = reweight(ens, lambda_next);
  rec.lambda = ens.lambda;
  rec.log_z_cum = ens.log_evidence;

  kernel_state.epsilon = adapt_stepsize(kernel_state.epsilon, rec.mean_accept, kernel_state);
  return rec;
}

// Full run: initialise, then iterate until lambda reaches 1 (or the safety
// cap). Exactly one model evaluation per particle at initialization and per
// MCMC step afterwards.
inline RunTrace run(const TemperedModel& model, const PriorSampler& prior_sampler,
                    const SmcConfig& cfg) {
  const std::uint64_t evals_before = model.evaluation_count();
  RunTrace trace;
  Ensemble ens = initialise(model, prior_sampler, cfg);

  IterationRecord init_rec;
  init_rec.t = 0;
  init_rec.lambda = ens.lambda;
  init_rec.ess_before = ess(ens.weights);
  init_rec.mean_accept = std::numeric_limits<double>::quiet_NaN();
  init_rec.epsilon = cfg.kernel_state.epsilon;
  init_rec.log_z_inc = ens.log_evidence;
  init_rec.log_z_cum = ens.log_evidence;
  trace.records.push_back(init_rec);

  KernelState kernel_state = cfg.kernel_state;
  int t = 0;
  while (ens.lambda < 1.0) {
    ++t;
    if (t > cfg.max_iters) {
      trace.status = RunStatus::max_iters_exceeded;
      trace.message = "max_iters reached before lambda hit 1";
      break;
    }
    try {
      trace.records.push_back(smc_step(ens, model, cfg, kernel_state, t));
    } catch (const BisectionError& e) {
      trace.status = RunStatus::tempering_failed;
      trace.message = e.what();
      break;
    }
  }
  trace.final_ensemble = std::move(ens);
  trace.total_evaluations = model.evaluation_count() - evals_before;
  return trace;
}

}  // namespace qnsmc
