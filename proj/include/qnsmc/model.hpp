#pragma once

#include "qnsmc/errors.hpp"
#include "qnsmc/math.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>

namespace qnsmc {

// Prior and likelihood contributions kept separate (values and gradients) so
// the tempered potential can be re-formed at any lambda without another model
// evaluation.
struct Evaluation {
  double log_prior = 0.0;
  double log_lik = 0.0;
  Vector grad_log_prior;
  Vector grad_log_lik;
};

// Immutable target model: joint evaluation of prior and likelihood with
// gradients. Safe to call concurrently; evaluations are counted.
class TemperedModel {
 public:
  using EvalFn = std::function<Evaluation(const Vector&)>;

  TemperedModel(Eigen::Index dim, EvalFn fn)
      : dim_(dim),
        fn_(std::move(fn)),
        eval_count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

  Eigen::Index dim() const { return dim_; }

  Evaluation evaluate(const Vector& x) const {
    eval_count_->fetch_add(1, std::memory_order_relaxed);
    return fn_(x);
  }

  std::uint64_t evaluation_count() const {
    return eval_count_->load(std::memory_order_relaxed);
  }

 private:
  Eigen::Index dim_;
  EvalFn fn_;
  std::shared_ptr<std::atomic<std::uint64_t>> eval_count_;
};

// U_lambda(x) = -log p(x) - lambda log p(y|x). A -inf log-density propagates
// to +inf potential; lambda = 0 never touches the likelihood term.
inline double tempered_potential(const Evaluation& ev, double lambda) {
  if (lambda == 0.0) return -ev.log_prior;
  return -ev.log_prior - lambda * ev.log_lik;
}

inline Vector tempered_gradient(const Evaluation& ev, double lambda) {
  Vector g = lambda == 0.0 ? Vector(-ev.grad_log_prior)
                           : Vector(-ev.grad_log_prior - lambda * ev.grad_log_lik);
  if (!g.allFinite())
    throw EvaluationError("non-finite tempered gradient component");
  return g;
}

}  // namespace qnsmc
