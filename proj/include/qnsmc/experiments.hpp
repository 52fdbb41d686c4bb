#pragma once

#include "qnsmc/smc.hpp"
#include "qnsmc/targets.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qnsmc {

enum class ExperimentKind { gaussian, gmm, conjugate_check };
enum class KernelChoice { mala, qn_mala, both };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::gaussian;
  KernelChoice kernel = KernelChoice::both;
  int repeats = 20;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  // SMC settings (defaults mirror the experiment setup)
  int n_particles = 1000;
  double rho = 0.95;
  double kappa = 0.5;
  double alpha_star = 0.8;
  double delta = 1.0;
  double omega = 1.0;
  int memory = 20;
  double epsilon0 = 0.1;
  int max_iters = 100000;
  int mcmc_repeats = 1;
  int threads = 0;
  double bisect_tol = 1e-4;
  int max_bisect_iters = 100;
  std::optional<InitStrategy> init_strategy;  // per-experiment default if unset

  // gaussian experiment
  int dim = 100;

  // gmm experiment
  std::string data_path = "data/hidalgo_stamps.txt";
  std::optional<double> gmm_a, gmm_b, gmm_alpha, gmm_g, gmm_h;
  bool reference_run = false;
  int reference_particles = 10000;

  // conjugate_check experiment
  double conjugate_y = 1.0;

  // write wall_seconds as 0 so outputs are byte-reproducible
  bool deterministic_timing = false;
};

struct HelpRequested {
  std::string text;
};

namespace detail_csv {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace detail_csv

inline std::string to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::gaussian: return "gaussian";
    case ExperimentKind::gmm: return "gmm";
    case ExperimentKind::conjugate_check: return "conjugate_check";
  }
  return "?";
}

inline std::string to_string(KernelKind k) {
  return k == KernelKind::mala ? "mala" : "qn_mala";
}

// Flags override config-file values override defaults; unknown keys are
// rejected. Throws HelpRequested for --help and UsageError on bad input.
inline ExperimentConfig parse_config(std::vector<std::string> args) {
  ExperimentConfig cfg;
  CLI::App app{"Tempered SMC sampler with Langevin and quasi-Newton Langevin kernels"};
  app.set_config("--config", "", "Config file (key = value lines)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  const std::map<std::string, ExperimentKind> experiments{
      {"gaussian", ExperimentKind::gaussian},
      {"gmm", ExperimentKind::gmm},
      {"conjugate_check", ExperimentKind::conjugate_check}};
  const std::map<std::string, KernelChoice> kernels{
      {"mala", KernelChoice::mala},
      {"qn_mala", KernelChoice::qn_mala},
      {"both", KernelChoice::both}};
  const std::map<std::string, InitStrategy> inits{
      {"identity", InitStrategy::identity},
      {"ensemble_diag", InitStrategy::ensemble_diag}};

  app.add_option("--experiment", cfg.experiment, "gaussian | gmm | conjugate_check")
      ->transform(CLI::CheckedTransformer(experiments));
  app.add_option("--kernel", cfg.kernel, "mala | qn_mala | both")
      ->transform(CLI::CheckedTransformer(kernels));
  app.add_option("--repeats", cfg.repeats, "independent repeats (paired seeds across kernels)");
  app.add_option("--seed", cfg.seed, "base seed");
  app.add_option("--output-dir", cfg.output_dir, "directory for CSV output");

  app.add_option("--n-particles", cfg.n_particles, "ensemble size N");
  app.add_option("--rho", cfg.rho, "ESS decay target in (0,1)");
  app.add_option("--kappa", cfg.kappa, "resample threshold fraction in (0,1]");
  app.add_option("--alpha-star", cfg.alpha_star, "target acceptance probability");
  app.add_option("--delta", cfg.delta, "stepsize adaptation rate");
  app.add_option("--omega", cfg.omega, "curvature bound for the beta shift");
  app.add_option("--memory", cfg.memory, "L-BFGS window m");
  app.add_option("--epsilon0", cfg.epsilon0, "initial stepsize");
  app.add_option("--max-iters", cfg.max_iters, "iteration safety cap");
  app.add_option("--mcmc-repeats", cfg.mcmc_repeats, "MCMC steps per particle per iteration");
  app.add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  app.add_option("--bisect-tol", cfg.bisect_tol, "relative ESS tolerance for the lambda solver");
  app.add_option("--max-bisect-iters", cfg.max_bisect_iters, "bisection iteration cap");

  InitStrategy init_tmp{};
  auto* init_opt = app.add_option("--init", init_tmp,
                                  "Hessian init: identity | ensemble_diag "
                                  "(default depends on experiment)")
                       ->transform(CLI::CheckedTransformer(inits));

  app.add_option("--dim", cfg.dim, "dimension of the gaussian experiment");

  app.add_option("--data", cfg.data_path, "stamp data file (gmm experiment)");
  app.add_option("--gmm-a", cfg.gmm_a, "prior mean of the component means");
  app.add_option("--gmm-b", cfg.gmm_b, "prior precision of the component means");
  app.add_option("--gmm-alpha", cfg.gmm_alpha, "Gamma shape for the precisions");
  app.add_option("--gmm-g", cfg.gmm_g, "Gamma shape for beta");
  app.add_option("--gmm-h", cfg.gmm_h, "Gamma rate for beta");
  app.add_flag("--reference-run", cfg.reference_run,
               "gmm only: regenerate the reference log-evidence with many particles");
  app.add_option("--reference-particles", cfg.reference_particles,
                 "particle count for --reference-run");

  app.add_option("--datum", cfg.conjugate_y, "observation for conjugate_check");
  app.add_flag("--deterministic-timing", cfg.deterministic_timing,
               "write wall_seconds as 0 for byte-reproducible output");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::Error& e) {
    throw UsageError(std::string(e.get_name()) + ": " + e.what());
  }
  if (init_opt->count() > 0) cfg.init_strategy = init_tmp;

  const auto range_error = [](const std::string& flag, double v, const std::string& interval) {
    throw UsageError(flag + ": value " + detail_csv::fmt(v) + " not in " + interval);
  };
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) range_error("--rho", cfg.rho, "(0,1)");
  if (!(cfg.kappa > 0.0 && cfg.kappa <= 1.0)) range_error("--kappa", cfg.kappa, "(0,1]");
  if (!(cfg.alpha_star > 0.0 && cfg.alpha_star < 1.0))
    range_error("--alpha-star", cfg.alpha_star, "(0,1)");
  if (!(cfg.epsilon0 > 0.0)) range_error("--epsilon0", cfg.epsilon0, "(0,inf)");
  if (!(cfg.omega > 0.0)) range_error("--omega", cfg.omega, "(0,inf)");
  if (!(cfg.delta >= 0.0)) range_error("--delta", cfg.delta, "[0,inf)");
  if (cfg.memory < 0) range_error("--memory", cfg.memory, "[0,inf)");
  if (cfg.repeats < 1) range_error("--repeats", cfg.repeats, "[1,inf)");
  if (cfg.n_particles < 2) range_error("--n-particles", cfg.n_particles, "[2,inf)");
  return cfg;
}

inline SmcConfig make_smc_config(const ExperimentConfig& cfg, KernelKind kernel,
                                 std::uint64_t run_seed) {
  SmcConfig sc;
  sc.n_particles = cfg.n_particles;
  sc.rho = cfg.rho;
  sc.kappa = cfg.kappa;
  sc.kernel = kernel;
  sc.kernel_state.epsilon = cfg.epsilon0;
  sc.kernel_state.alpha_star = cfg.alpha_star;
  sc.kernel_state.delta = cfg.delta;
  sc.kernel_state.memory = cfg.memory;
  sc.kernel_state.omega = cfg.omega;
  if (cfg.init_strategy) {
    sc.kernel_state.init_strategy = *cfg.init_strategy;
  } else {
    // experiment conventions: inverse diagonal sample covariance for the
    // scaled gaussian, identity for the multi-modal mixture
    sc.kernel_state.init_strategy = cfg.experiment == ExperimentKind::gaussian
                                        ? InitStrategy::ensemble_diag
                                        : InitStrategy::identity;
  }
  sc.temper.rho = cfg.rho;
  sc.temper.bisect_tol = cfg.bisect_tol;
  sc.temper.max_bisect_iters = cfg.max_bisect_iters;
  sc.seed = run_seed;
  sc.max_iters = cfg.max_iters;
  sc.mcmc_repeats = cfg.mcmc_repeats;
  sc.threads = cfg.threads;
  return sc;
}

inline void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SmcError("cannot write " + path);
  out << "t,lambda,ess,resampled,mean_accept,epsilon,log_z_inc,log_z_cum\n";
  using detail_csv::fmt;
  for (const auto& r : trace.records) {
    out << r.t << ',' << fmt(r.lambda) << ',' << fmt(r.ess_before) << ','
        << (r.resampled ? 1 : 0) << ',' << fmt(r.mean_accept) << ',' << fmt(r.epsilon)
        << ',' << fmt(r.log_z_inc) << ',' << fmt(r.log_z_cum) << '\n';
  }
}

// Weighted posterior draws of the constrained mixture parameters.
inline void write_gmm_samples_csv(const std::string& path, const Ensemble& ens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SmcError("cannot write " + path);
  out << "weight,mu1,mu2,mu3,nu1,nu2,nu3,z1,z2,beta\n";
  using detail_csv::fmt;
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    const GmmConstrained c = GaussianMixtureTarget::constrain(ens.particles[i].point);
    out << fmt(ens.weights[i]) << ',' << fmt(c.mu[0]) << ',' << fmt(c.mu[1]) << ','
        << fmt(c.mu[2]) << ',' << fmt(c.nu[0]) << ',' << fmt(c.nu[1]) << ','
        << fmt(c.nu[2]) << ',' << fmt(c.z[0]) << ',' << fmt(c.z[1]) << ','
        << fmt(c.beta) << '\n';
  }
}

// Rank of the ordering pattern of (mu_1, mu_2, mu_3): 6 possible label
// arrangements.
inline int mu_ordering_rank(double m1, double m2, double m3) {
  std::array<int, 3> idx{0, 1, 2};
  const std::array<double, 3> mu{m1, m2, m3};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return mu[a] < mu[b]; });
  return idx[0] * 2 + (idx[1] > idx[2] ? 1 : 0);
}

// Distinct mu-orderings carrying at least 1% of the total weight (boundary
// inclusive).
inline int mode_count(const Matrix& mu_samples, const Vector& weights) {
  if (mu_samples.rows() == 0) throw SmcError("mode_count: no samples");
  std::array<double, 6> mass{};
  double total = 0.0;
  for (Eigen::Index i = 0; i < mu_samples.rows(); ++i) {
    mass[mu_ordering_rank(mu_samples(i, 0), mu_samples(i, 1), mu_samples(i, 2))] +=
        weights[i];
    total += weights[i];
  }
  int count = 0;
  for (double m : mass)
    if (m >= 0.01 * total - 1e-12 * total) ++count;
  return count;
}

inline int mode_count(const Ensemble& ens) {
  Matrix mu(ens.size(), 3);
  for (Eigen::Index i = 0; i < ens.size(); ++i)
    mu.row(i) = ens.particles[i].point.segment(0, 3).transpose();
  return mode_count(mu, ens.weights);
}

// Run every (repeat, kernel) combination, write per-run trace CSVs plus a
// summary CSV, and return a nonzero status if any run failed.
inline int run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  std::vector<KernelKind> kernels;
  if (cfg.kernel == KernelChoice::mala || cfg.kernel == KernelChoice::both)
    kernels.push_back(KernelKind::mala);
  if (cfg.kernel == KernelChoice::qn_mala || cfg.kernel == KernelChoice::both)
    kernels.push_back(KernelKind::qn_mala);

  // shared target state
  std::optional<AnisotropicGaussian> gauss;
  std::optional<GaussianMixtureTarget> gmm;
  std::optional<ConjugateGaussian> conj;
  if (cfg.experiment == ExperimentKind::gaussian) {
    gauss.emplace(cfg.dim);
  } else if (cfg.experiment == ExperimentKind::gmm) {
    const bool shipped = cfg.data_path.find("hidalgo") != std::string::npos;
    Vector data = load_stamps(cfg.data_path,
                              shipped ? std::optional<Eigen::Index>(485) : std::nullopt);
    GmmHyper hyper = GmmHyper::from_data(data);
    if (cfg.gmm_a) hyper.a = *cfg.gmm_a;
    if (cfg.gmm_b) hyper.b = *cfg.gmm_b;
    if (cfg.gmm_alpha) hyper.alpha = *cfg.gmm_alpha;
    if (cfg.gmm_g) hyper.g = *cfg.gmm_g;
    if (cfg.gmm_h) hyper.h = *cfg.gmm_h;
    gmm.emplace(std::move(data), hyper);
  } else {
    conj.emplace(ConjugateGaussian{cfg.conjugate_y});
  }

  const auto model_for = [&]() -> TemperedModel {
    if (gauss) return gauss->model();
    if (gmm) return gmm->model();
    return conj->model();
  };
  const auto sampler_for = [&]() {
    if (gauss) return gauss->prior_sampler();
    if (gmm) return gmm->prior_sampler();
    return conj->prior_sampler();
  };

  // gmm reference mode: one long classical run with a large ensemble
  if (cfg.reference_run) {
    if (cfg.experiment != ExperimentKind::gmm)
      throw UsageError("--reference-run: only meaningful for --experiment gmm");
    ExperimentConfig ref = cfg;
    ref.n_particles = cfg.reference_particles;
    SmcConfig sc = make_smc_config(ref, KernelKind::mala, splitmix64(cfg.seed));
    const TemperedModel model = model_for();
    RunTrace trace = run(model, sampler_for(), sc);
    std::ofstream out(fs::path(cfg.output_dir) / "reference_log_z.csv", std::ios::binary);
    out << "kernel,n_particles,T_iterations,final_log_evidence\n";
    out << "mala," << ref.n_particles << ',' << trace.iterations() << ','
        << detail_csv::fmt(trace.final_ensemble.log_evidence) << '\n';
    return trace.status == RunStatus::ok ? 0 : 1;
  }

  std::ostringstream summary;
  summary << "repeat,kernel,T_iterations,final_log_evidence";
  if (cfg.experiment == ExperimentKind::gaussian) summary << ",kl_to_truth";
  if (cfg.experiment == ExperimentKind::gmm) summary << ",modes_found";
  if (cfg.experiment == ExperimentKind::conjugate_check) summary << ",analytic_log_evidence";
  summary << ",wall_seconds,error\n";

  bool any_failed = false;
  const TemperedModel model = model_for();
  const PriorSampler sampler = sampler_for();

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t run_seed = absorb(splitmix64(cfg.seed), static_cast<std::uint64_t>(r));
    for (KernelKind kernel : kernels) {
      const SmcConfig sc = make_smc_config(cfg, kernel, run_seed);
      const std::string tag = to_string(cfg.experiment) + "_" + to_string(kernel) +
                              "_rep" + std::to_string(r);
      std::string error;
      double wall = 0.0;
      RunTrace trace;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        trace = run(model, sampler, sc);
        if (trace.status != RunStatus::ok) {
          error = detail_csv::sanitize(trace.message);
          any_failed = true;
        }
      } catch (const SmcError& e) {
        error = detail_csv::sanitize(e.what());
        any_failed = true;
      }
      wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (cfg.deterministic_timing) wall = 0.0;

      using detail_csv::fmt;
      summary << r << ',' << to_string(kernel) << ',';
      if (error.empty() || !trace.records.empty()) {
        write_trace_csv((fs::path(cfg.output_dir) / ("trace_" + tag + ".csv")).string(),
                        trace);
      }
      if (error.empty()) {
        const Ensemble& fin = trace.final_ensemble;
        summary << trace.iterations() << ',' << fmt(fin.log_evidence);
        if (cfg.experiment == ExperimentKind::gaussian) {
          auto [mean, cov] = weighted_moments(fin);
          const double kl = gaussian_kl(mean, cov, Vector::Zero(gauss->d),
                                        gauss->target_covariance());
          summary << ',' << fmt(kl);
        } else if (cfg.experiment == ExperimentKind::gmm) {
          write_gmm_samples_csv(
              (fs::path(cfg.output_dir) / ("samples_" + tag + ".csv")).string(), fin);
          summary << ',' << mode_count(fin);
        } else {
          summary << ',' << fmt(conj->analytic_log_evidence());
        }
      } else {
        summary << "nan,nan,nan";
      }
      summary << ',' << fmt(wall) << ',' << error << '\n';
    }
  }

  std::ofstream out(fs::path(cfg.output_dir) / "summary.csv", std::ios::binary);
  if (!out) throw SmcError("cannot write summary.csv");
  out << summary.str();
  return any_failed ? 1 : 0;
}

}  // namespace qnsmc
