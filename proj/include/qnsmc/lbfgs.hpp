#pragma once

#include "qnsmc/errors.hpp"
#include "qnsmc/math.hpp"

#include <Eigen/Core>

#include <cmath>
#include <utility>
#include <vector>

namespace qnsmc {

// The module is generic over the scalar so tests can instrument arithmetic;
// production code uses the double aliases at the bottom.
template <class Scalar>
using VectorOf = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Displacement / gradient-difference pair. s must not be identically zero;
// zero-displacement pairs (rejected MH moves) are skipped upstream.
template <class Scalar>
struct PairT {
  VectorOf<Scalar> s;
  VectorOf<Scalar> y;
};

// Strictly positive diagonal of the initial guess B_{t-m}.
template <class Scalar>
struct DiagInitT {
  VectorOf<Scalar> diag;

  static DiagInitT identity(Eigen::Index d) {
    return {VectorOf<Scalar>::Ones(d)};
  }
};

// Curvature repair: shift every y_r by beta * B0 s_r with
//   beta = max(0, max_r(-s_r.y_r / s_r.B0 s_r) + omega),
// which guarantees s_r.y_r >= omega * s_r.B0 s_r > 0 for all r.
template <class Scalar>
std::pair<std::vector<PairT<Scalar>>, Scalar> adjust_pairs(
    std::vector<PairT<Scalar>> pairs, const DiagInitT<Scalar>& init, Scalar omega) {
  Scalar worst(0);
  bool first = true;
  for (const auto& pr : pairs) {
    const VectorOf<Scalar> b0s = init.diag.cwiseProduct(pr.s);
    const Scalar denom = pr.s.dot(b0s);
    if (!(denom > Scalar(0)))
      throw FactorBuildError("adjust_pairs: zero-displacement pair");
    const Scalar ratio = -pr.s.dot(pr.y) / denom;
    if (first || ratio > worst) worst = ratio;
    first = false;
  }
  Scalar beta = worst + omega;
  if (!(beta > Scalar(0))) beta = Scalar(0);
  if (beta > Scalar(0)) {
    for (auto& pr : pairs) pr.y += beta * init.diag.cwiseProduct(pr.s);
  }
  return {std::move(pairs), beta};
}

// Square-root L-BFGS factors: B = C C^T and B^-1 = S S^T as chains of
// rank-one updates over a diagonal start,
//   C_{r+1} = (I - u_r t_r^T) C_r,   S_{r+1} = (I - p_r q_r^T) S_r,
// stored oldest first; every product below is O(m d).
template <class Scalar>
struct BfgsFactorsT {
  struct RankOne {
    VectorOf<Scalar> u, t, p, q;
  };

  VectorOf<Scalar> init_diag;      // diagonal of B_{t-m}
  VectorOf<Scalar> sqrt_diag;      // C_{t-m}
  VectorOf<Scalar> inv_sqrt_diag;  // S_{t-m}
  std::vector<RankOne> rank_one;   // oldest -> newest
  Scalar beta{0};
  Scalar log_det_B{0};

  Eigen::Index dim() const { return init_diag.size(); }
  int size() const { return static_cast<int>(rank_one.size()); }

  // C z: newest factor outermost.
  VectorOf<Scalar> apply_C(const VectorOf<Scalar>& z) const {
    VectorOf<Scalar> v = sqrt_diag.cwiseProduct(check(z));
    for (std::size_t r = 0; r < rank_one.size(); ++r)
      v -= rank_one[r].u * rank_one[r].t.dot(v);
    return v;
  }

  // C^T z: transposed chain, factors in reverse with u/t roles swapped.
  VectorOf<Scalar> apply_C_T(const VectorOf<Scalar>& z) const {
    VectorOf<Scalar> v = check(z);
    for (std::size_t r = rank_one.size(); r-- > 0;)
      v -= rank_one[r].t * rank_one[r].u.dot(v);
    return sqrt_diag.cwiseProduct(v);
  }

  VectorOf<Scalar> apply_S(const VectorOf<Scalar>& z) const {
    VectorOf<Scalar> v = inv_sqrt_diag.cwiseProduct(check(z));
    for (std::size_t r = 0; r < rank_one.size(); ++r)
      v -= rank_one[r].p * rank_one[r].q.dot(v);
    return v;
  }

  VectorOf<Scalar> apply_S_T(const VectorOf<Scalar>& z) const {
    VectorOf<Scalar> v = check(z);
    for (std::size_t r = rank_one.size(); r-- > 0;)
      v -= rank_one[r].q * rank_one[r].p.dot(v);
    return inv_sqrt_diag.cwiseProduct(v);
  }

  VectorOf<Scalar> apply_B(const VectorOf<Scalar>& z) const {
    return apply_C(apply_C_T(z));
  }

  VectorOf<Scalar> apply_B_inv(const VectorOf<Scalar>& z) const {
    return apply_S(apply_S_T(z));
  }

 private:
  const VectorOf<Scalar>& check(const VectorOf<Scalar>& z) const {
    if (z.size() != dim())
      throw std::invalid_argument("lbfgs apply: dimension mismatch");
    return z;
  }
};

// Run the recursion oldest -> newest over the (beta-adjusted) pairs. B_r s_r
// is formed through the factors accumulated so far, so the whole build costs
// O(m^2 d). log det B accumulates log(s.y / s.Bs) per step on top of the
// diagonal start; both quantities are checked positive.
template <class Scalar>
BfgsFactorsT<Scalar> build_factors(const std::vector<PairT<Scalar>>& pairs,
                                   const DiagInitT<Scalar>& init, Scalar omega) {
  using std::log;
  using std::sqrt;

  BfgsFactorsT<Scalar> f;
  f.init_diag = init.diag;
  f.sqrt_diag.resize(init.diag.size());
  f.inv_sqrt_diag.resize(init.diag.size());
  Scalar log_det(0);
  for (Eigen::Index i = 0; i < init.diag.size(); ++i) {
    if (!(init.diag[i] > Scalar(0)))
      throw FactorBuildError("build_factors: initial diagonal must be positive");
    f.sqrt_diag[i] = sqrt(init.diag[i]);
    f.inv_sqrt_diag[i] = Scalar(1) / f.sqrt_diag[i];
    log_det += log(init.diag[i]);
  }

  if (pairs.empty()) {
    f.log_det_B = log_det;
    return f;
  }

  auto [adjusted, beta] = adjust_pairs(pairs, init, omega);
  f.beta = beta;
  f.rank_one.reserve(adjusted.size());

  for (const auto& pr : adjusted) {
    const VectorOf<Scalar> bs = f.apply_B(pr.s);
    const Scalar a = pr.s.dot(bs);   // s^T B s
    const Scalar b = pr.s.dot(pr.y); // s^T y, positive after adjustment
    if (!(a > Scalar(0)) || !(b > Scalar(0)))
      throw FactorBuildError("build_factors: non-positive curvature product");
    typename BfgsFactorsT<Scalar>::RankOne ro;
    ro.t = pr.s / a;
    ro.p = pr.s / b;
    ro.u = sqrt(a / b) * pr.y + bs;
    ro.q = sqrt(b / a) * bs + pr.y;
    f.rank_one.push_back(std::move(ro));
    log_det += log(b) - log(a);  // det factor (1 - t.u)^2 = b/a per step
  }
  f.log_det_B = log_det;
  return f;
}

using Pair = PairT<double>;
using DiagInit = DiagInitT<double>;
using LbfgsFactors = BfgsFactorsT<double>;

}  // namespace qnsmc
