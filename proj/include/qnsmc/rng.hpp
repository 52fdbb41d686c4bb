#pragma once

#include "qnsmc/math.hpp"

#include <cstdint>
#include <random>

namespace qnsmc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fold v into a running hash state.
inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

enum class StreamTag : std::uint64_t {
  prior = 1,
  move = 2,
  resample = 3,
  repeat = 4,
};

// One independent stream per (seed, tag, iteration, index). Streams are a pure
// function of those values, never of scheduling, so a run is reproducible for
// any worker count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t state) : engine_(state) {}

  static RngStream derived(std::uint64_t seed, StreamTag tag, std::uint64_t t,
                           std::uint64_t i) {
    std::uint64_t h = splitmix64(seed);
    h = absorb(h, static_cast<std::uint64_t>(tag));
    h = absorb(h, t);
    h = absorb(h, i);
    return RngStream(h);
  }

  double normal() {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(engine_);
  }

  // iid standard normal coordinates
  Vector normal_vector(Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = n(engine_);
    return v;
  }

  // uniform on [0, 1)
  double uniform() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qnsmc
