#pragma once

// Arithmetic-counting scalar for asserting operation complexity of the
// factorized L-BFGS products.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace counting {

struct CountedDouble {
  double v = 0.0;

  CountedDouble() = default;
  CountedDouble(double x) : v(x) {}  // NOLINT: implicit by design

  static inline thread_local std::uint64_t mults = 0;
  static inline thread_local std::uint64_t adds = 0;

  static void reset() {
    mults = 0;
    adds = 0;
  }

  CountedDouble operator-() const { return {-v}; }
  CountedDouble& operator+=(CountedDouble o) {
    ++adds;
    v += o.v;
    return *this;
  }
  CountedDouble& operator-=(CountedDouble o) {
    ++adds;
    v -= o.v;
    return *this;
  }
  CountedDouble& operator*=(CountedDouble o) {
    ++mults;
    v *= o.v;
    return *this;
  }
  CountedDouble& operator/=(CountedDouble o) {
    ++mults;
    v /= o.v;
    return *this;
  }

  friend CountedDouble operator+(CountedDouble a, CountedDouble b) { return a += b; }
  friend CountedDouble operator-(CountedDouble a, CountedDouble b) { return a -= b; }
  friend CountedDouble operator*(CountedDouble a, CountedDouble b) { return a *= b; }
  friend CountedDouble operator/(CountedDouble a, CountedDouble b) { return a /= b; }

  friend bool operator==(CountedDouble a, CountedDouble b) { return a.v == b.v; }
  friend bool operator!=(CountedDouble a, CountedDouble b) { return a.v != b.v; }
  friend bool operator<(CountedDouble a, CountedDouble b) { return a.v < b.v; }
  friend bool operator<=(CountedDouble a, CountedDouble b) { return a.v <= b.v; }
  friend bool operator>(CountedDouble a, CountedDouble b) { return a.v > b.v; }
  friend bool operator>=(CountedDouble a, CountedDouble b) { return a.v >= b.v; }
};

inline CountedDouble sqrt(CountedDouble a) { return {std::sqrt(a.v)}; }
inline CountedDouble log(CountedDouble a) { return {std::log(a.v)}; }
inline CountedDouble abs(CountedDouble a) { return {std::abs(a.v)}; }
inline CountedDouble abs2(CountedDouble a) { return {a.v * a.v}; }
inline CountedDouble conj(CountedDouble a) { return a; }
inline CountedDouble real(CountedDouble a) { return a; }
inline CountedDouble imag(CountedDouble) { return {0.0}; }

}  // namespace counting

namespace Eigen {

template <>
struct NumTraits<counting::CountedDouble> : NumTraits<double> {
  using Real = counting::CountedDouble;
  using NonInteger = counting::CountedDouble;
  using Nested = counting::CountedDouble;
  using Literal = counting::CountedDouble;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 1,
  };
  static inline Real epsilon() { return {NumTraits<double>::epsilon()}; }
  static inline Real dummy_precision() { return {NumTraits<double>::dummy_precision()}; }
  static inline Real highest() { return {NumTraits<double>::highest()}; }
  static inline Real lowest() { return {NumTraits<double>::lowest()}; }
};

}  // namespace Eigen
