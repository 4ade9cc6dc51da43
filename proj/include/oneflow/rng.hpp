#pragma once

// Deterministic random number generation and elementary distributions.
// PCG64 (XSL-RR 128/64) with per-stream increments: substreams keyed by
// (seed, stream_id) never share a sequence.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace oneflow {

class Rng {
 public:
  using u64 = std::uint64_t;
  using u128 = unsigned __int128;

  explicit Rng(u64 seed, u64 stream_id = 0) {
    const u128 initstate = (u128(seed) << 64) | (seed ^ 0x9e3779b97f4a7c15ull);
    const u128 initseq = (u128(stream_id) << 64) | (stream_id * 0xda942042e4dd58b5ull + 1ull);
    inc_ = (initseq << 1) | 1;
    state_ = 0;
    next_u64();
    state_ += initstate;
    next_u64();
  }

  u64 next_u64() {
    state_ = state_ * kMultiplier + inc_;
    const u64 xored = u64(state_ >> 64) ^ u64(state_);
    const unsigned rot = unsigned(state_ >> 122);
    return (xored >> rot) | (xored << ((-rot) & 63u));
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double std = 1.0) {
    if (!(std >= 0.0) || !std::isfinite(std)) {
      throw std::invalid_argument("normal: std must be finite and >= 0");
    }
    if (have_spare_) {
      have_spare_ = false;
      return mean + std * spare_;
    }
    // Box-Muller; u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + std * r * std::cos(a);
  }

  // Marsaglia-Tsang; a < 1 handled by boosting.
  double gamma(double a) {
    if (!(a > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
    if (a < 1.0) {
      const double u = uniform();
      return gamma(a + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / a);
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u > 0.0 ? u : 0x1.0p-53) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v;
      }
    }
  }

  double beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) {
      throw std::invalid_argument("beta: shapes must be > 0");
    }
    const double ga = gamma(a);
    const double gb = gamma(b);
    return ga / (ga + gb);
  }

  int bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("bernoulli: p must be in [0, 1]");
    }
    return uniform() < p ? 1 : 0;
  }

  // Uniform integer in [0, n).
  u64 below(u64 n) {
    const u64 threshold = (-n) % n;
    for (;;) {
      const u64 r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static constexpr u128 kMultiplier =
      (u128(2549297995355413924ull) << 64) | 4865540595714422341ull;
  u128 state_ = 0;
  u128 inc_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace oneflow
