#pragma once

#include "qnsmc/errors.hpp"
#include "qnsmc/math.hpp"
#include "qnsmc/model.hpp"
#include "qnsmc/rng.hpp"
#include "qnsmc/transforms.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qnsmc {

// ---------------------------------------------------------------------------
// Conjugate 1-d check model: prior N(0,1), likelihood N(y_obs | x, 1). The
// evidence integral has the closed form N(y_obs | 0, 2).
struct ConjugateGaussian {
  double y_obs = 1.0;

  TemperedModel model() const {
    const double y = y_obs;
    return TemperedModel(1, [y](const Vector& x) {
      Evaluation ev;
      ev.log_prior = log_normal_pdf(x[0], 0.0, 1.0);
      ev.log_lik = log_normal_pdf(y, x[0], 1.0);
      ev.grad_log_prior = Vector::Constant(1, -x[0]);
      ev.grad_log_lik = Vector::Constant(1, y - x[0]);
      return ev;
    });
  }

  std::function<Vector(RngStream&)> prior_sampler() const {
    return [](RngStream& rng) { return rng.normal_vector(1); };
  }

  double analytic_log_evidence() const { return log_normal_pdf(y_obs, 0.0, 2.0); }
};

// ---------------------------------------------------------------------------
// Zero-mean Gaussian with sigma_i = i/d (the d = 100 fixture has standard
// deviations 0.01 .. 1.00). The prior is an artificial N(0, I); the
// "likelihood" is the density ratio so lambda = 1 recovers N(0, Q).
struct AnisotropicGaussian {
  Eigen::Index d;
  Vector scales;

  explicit AnisotropicGaussian(Eigen::Index dim) : d(dim), scales(dim) {
    for (Eigen::Index i = 0; i < dim; ++i)
      scales[i] = static_cast<double>(i + 1) / static_cast<double>(dim);
  }

  Matrix target_covariance() const {
    return scales.array().square().matrix().asDiagonal();
  }

  TemperedModel model() const {
    const Vector sigma = scales;
    const double sum_log_sigma = sigma.array().log().sum();
    // 1/sigma_i^2 - 1
    const Vector prec_gap = (sigma.array().square().inverse() - 1.0).matrix();
    return TemperedModel(d, [sigma, sum_log_sigma, prec_gap](const Vector& x) {
      const auto dim = static_cast<double>(x.size());
      Evaluation ev;
      ev.log_prior = -0.5 * dim * std::log(2.0 * M_PI) - 0.5 * x.squaredNorm();
      ev.grad_log_prior = -x;
      ev.log_lik = -sum_log_sigma - 0.5 * x.cwiseProduct(prec_gap).dot(x);
      ev.grad_log_lik = -x.cwiseProduct(prec_gap);
      return ev;
    });
  }

  std::function<Vector(RngStream&)> prior_sampler() const {
    const Eigen::Index dim = d;
    return [dim](RngStream& rng) { return rng.normal_vector(dim); };
  }
};

// ---------------------------------------------------------------------------
// Three-component univariate Gaussian mixture with the hierarchical prior
//   z ~ Dirichlet(1,1,1), mu_i ~ N(a, 1/b), nu_i ~ Gamma(alpha, beta),
//   beta ~ Gamma(g, h)      (rate parameterization throughout),
// sampled in the 9-d unconstrained space
//   x = (mu_1..3, log nu_1..3, stick y_1..2, log beta)
// with the transform Jacobians folded into the prior density.

struct GmmHyper {
  double a = 0.0;
  double b = 1.0;
  double alpha = 2.0;
  double g = 0.2;
  double h = 1.0;

  // Data-driven convention: a = midrange, b = 1/R^2, alpha = 2, g = 0.2,
  // h = 10/R^2 with R the data range.
  static GmmHyper from_data(const Vector& data) {
    const double lo = data.minCoeff();
    const double hi = data.maxCoeff();
    const double range = hi - lo;
    GmmHyper hy;
    hy.a = 0.5 * (lo + hi);
    hy.b = 1.0 / (range * range);
    hy.alpha = 2.0;
    hy.g = 0.2;
    hy.h = 10.0 / (range * range);
    return hy;
  }
};

struct GmmConstrained {
  Vector mu;  // K
  Vector nu;  // K, precisions
  Vector z;   // K, simplex
  double beta = 0.0;
};

class GaussianMixtureTarget {
 public:
  static constexpr int kComponents = 3;
  static constexpr Eigen::Index kDim = 9;

  GaussianMixtureTarget(Vector data, GmmHyper hyper)
      : data_(std::move(data)), hyper_(hyper) {
    if (data_.size() == 0) throw SmcError("gmm: data must be nonempty");
  }

  const Vector& data() const { return data_; }
  const GmmHyper& hyper() const { return hyper_; }

  static GmmConstrained constrain(const Vector& x) {
    GmmConstrained c;
    c.mu = x.segment(0, kComponents);
    c.nu = x.segment(kComponents, kComponents).array().exp();
    c.z = simplex_forward(x.segment(2 * kComponents, kComponents - 1)).z;
    c.beta = std::exp(x[kDim - 1]);
    return c;
  }

  static Vector unconstrain(const GmmConstrained& c) {
    Vector x(kDim);
    x.segment(0, kComponents) = c.mu;
    x.segment(kComponents, kComponents) = c.nu.array().log();
    x.segment(2 * kComponents, kComponents - 1) = simplex_inverse(c.z);
    x[kDim - 1] = std::log(c.beta);
    return x;
  }

  TemperedModel model() const {
    GaussianMixtureTarget self = *this;
    return TemperedModel(kDim, [self](const Vector& x) { return self.evaluate(x); });
  }

  std::function<Vector(RngStream&)> prior_sampler() const {
    const GmmHyper hy = hyper_;
    return [hy](RngStream& rng) {
      auto& eng = rng.engine();
      std::gamma_distribution<double> gamma_beta(hy.g, 1.0 / hy.h);
      const double beta = std::max(gamma_beta(eng), 1e-300);
      std::gamma_distribution<double> gamma_nu(hy.alpha, 1.0 / beta);
      std::normal_distribution<double> norm(0.0, 1.0);
      std::exponential_distribution<double> expo(1.0);

      GmmConstrained c;
      c.mu.resize(kComponents);
      c.nu.resize(kComponents);
      c.z.resize(kComponents);
      for (int i = 0; i < kComponents; ++i) {
        c.mu[i] = hy.a + norm(eng) / std::sqrt(hy.b);
        c.nu[i] = std::max(gamma_nu(eng), 1e-300);
      }
      double total = 0.0;
      for (int i = 0; i < kComponents; ++i) {
        c.z[i] = expo(eng);
        total += c.z[i];
      }
      c.z /= total;
      c.beta = beta;
      return unconstrain(c);
    };
  }

  Evaluation evaluate(const Vector& x) const {
    constexpr int K = kComponents;
    const GmmHyper& hy = hyper_;
    Evaluation ev;
    ev.grad_log_prior = Vector::Zero(kDim);
    ev.grad_log_lik = Vector::Zero(kDim);

    const Vector mu = x.segment(0, K);
    const Vector w = x.segment(K, K);  // log nu
    const Vector nu = w.array().exp();
    const SimplexForwardGrad sf = simplex_forward_grad(x.segment(2 * K, K - 1));
    const Vector& z = sf.z;
    const double log_beta = x[kDim - 1];
    const double beta = std::exp(log_beta);

    // --- likelihood: sum_k log sum_i z_i N(y_k | mu_i, 1/nu_i)
    const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
    double lognorm[K];  // log N(y|mu_i, 1/nu_i) without the quadratic term
    double logz[K];
    for (int i = 0; i < K; ++i) {
      lognorm[i] = 0.5 * w[i] - half_log_2pi;
      logz[i] = std::log(z[i]);
    }

    double log_lik = 0.0;
    Vector dmu = Vector::Zero(K);
    Vector dw = Vector::Zero(K);
    Vector dz = Vector::Zero(K);
    for (Eigen::Index k = 0; k < data_.size(); ++k) {
      const double yk = data_[k];
      double le[K];   // log of z_i N(y_k | mu_i, 1/nu_i)
      double lnk[K];  // log of N(y_k | mu_i, 1/nu_i)
      double m = kNegInf;
      for (int i = 0; i < K; ++i) {
        const double q = yk - mu[i];
        lnk[i] = lognorm[i] - 0.5 * nu[i] * q * q;
        le[i] = logz[i] + lnk[i];
        if (le[i] > m) m = le[i];
      }
      if (!std::isfinite(m)) {  // all components vanish at this datum
        log_lik = kNegInf;
        break;
      }
      double sum = 0.0;
      for (int i = 0; i < K; ++i) sum += std::exp(le[i] - m);
      const double lk = m + std::log(sum);
      log_lik += lk;
      for (int i = 0; i < K; ++i) {
        const double q = yk - mu[i];
        const double resp = std::exp(le[i] - lk);
        dmu[i] += resp * nu[i] * q;
        dw[i] += resp * 0.5 * (1.0 - nu[i] * q * q);
        dz[i] += std::exp(lnk[i] - lk);  // resp / z_i without the 0/0
      }
    }
    ev.log_lik = log_lik;
    if (std::isfinite(log_lik)) {
      ev.grad_log_lik.segment(0, K) = dmu;
      ev.grad_log_lik.segment(K, K) = dw;
      ev.grad_log_lik.segment(2 * K, K - 1) = sf.dz_dy.transpose() * dz;
    }

    // --- prior in the unconstrained space (Jacobians included)
    double lp = std::lgamma(static_cast<double>(K));  // Dirichlet(1,..,1)
    for (int i = 0; i < K; ++i) {
      lp += 0.5 * std::log(hy.b / (2.0 * M_PI)) - 0.5 * hy.b * (mu[i] - hy.a) * (mu[i] - hy.a);
      lp += hy.alpha * log_beta - std::lgamma(hy.alpha) + (hy.alpha - 1.0) * w[i] -
            beta * nu[i];
      lp += w[i];  // log-nu Jacobian
    }
    lp += hy.g * std::log(hy.h) - std::lgamma(hy.g) + (hy.g - 1.0) * log_beta -
          hy.h * beta;
    lp += log_beta;          // log-beta Jacobian
    lp += sf.log_jacobian;   // simplex Jacobian
    ev.log_prior = lp;

    ev.grad_log_prior.segment(0, K) = (-hy.b * (mu.array() - hy.a)).matrix();
    ev.grad_log_prior.segment(K, K) = (hy.alpha - beta * nu.array()).matrix();
    ev.grad_log_prior.segment(2 * K, K - 1) = sf.dlogjac_dy;
    ev.grad_log_prior[kDim - 1] =
        K * hy.alpha + hy.g - beta * (nu.sum() + hy.h);
    return ev;
  }

 private:
  Vector data_;
  GmmHyper hyper_;
};

// ---------------------------------------------------------------------------
// Newline-delimited positive decimal values; '#' lines are comments. Parse
// errors name the offending line.
inline Vector load_stamps(const std::string& path,
                          std::optional<Eigen::Index> expected_count = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataLoadError("load_stamps: cannot open " + path);
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    const char* begin = line.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    bool ok = end != begin;
    while (ok && *end != '\0') {
      if (!std::isspace(static_cast<unsigned char>(*end))) ok = false;
      ++end;
    }
    if (!ok)
      throw DataLoadError("load_stamps: parse failure at " + path + ":" +
                          std::to_string(line_no));
    if (!std::isfinite(v) || v <= 0.0)
      throw DataLoadError("load_stamps: non-positive value at " + path + ":" +
                          std::to_string(line_no));
    values.push_back(v);
  }
  if (values.empty()) throw DataLoadError("load_stamps: no data in " + path);
  if (expected_count && static_cast<Eigen::Index>(values.size()) != *expected_count)
    throw DataLoadError("load_stamps: expected " + std::to_string(*expected_count) +
                        " values in " + path + ", found " + std::to_string(values.size()) +
                        " (last line " + std::to_string(line_no) + ")");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace qnsmc
