#pragma once

#include <cmath>
#include <cstdint>

#include "hopflab/common.hpp"

namespace hopflab {

namespace detail {

/// SplitMix64 step. Used to expand seeds into generator state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// xoshiro256++ generator with explicit substream derivation.
///
/// A substream is keyed by (seed, index). Expanding the key through
/// SplitMix64 gives statistically independent streams, so per-path
/// results do not depend on how paths are distributed over workers.
class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream_index) {
    // Mix the index into the seed, then expand to 256 bits of state.
    std::uint64_t key = seed ^ (0x9E3779B97F4A7C15ull * (stream_index + 1));
    s_[0] = detail::splitmix64(key);
    s_[1] = detail::splitmix64(key);
    s_[2] = detail::splitmix64(key);
    s_[3] = detail::splitmix64(key);
  }

  using result_type = std::uint64_t;
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~0ull; }

  std::uint64_t operator()() {
    const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  /// Uniform in (0,1). Never returns 0 or 1.
  double uniform() {
    // 53-bit mantissa, shifted into (0,1) by a half-ulp offset.
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via the polar method.
  double gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Vec gauss_vec(int d) {
    Vec z(d);
    for (int i = 0; i < d; ++i) z[i] = gauss();
    return z;
  }

  double exponential() { return -std::log(uniform()); }

  /// Standard symmetric alpha-stable, characteristic function exp(-|xi|^alpha).
  /// Chambers-Mallows-Stuck representation; alpha in (0,2].
  double stable_symmetric(double alpha) {
    const double v = kPi * (uniform() - 0.5);  // Uniform(-pi/2, pi/2)
    const double e = exponential();
    const double cv = std::cos(v);
    // (1-alpha)/alpha is exactly 0 at alpha = 1 and pow(x,0) = 1, so the
    // expression degrades gracefully to tan(v) there.
    const double t = std::sin(alpha * v) / std::pow(cv, 1.0 / alpha);
    const double w = std::pow(std::cos((1.0 - alpha) * v) / e, (1.0 - alpha) / alpha);
    return t * w;
  }

  /// One-sided stable of index gamma in (0,1), Laplace transform exp(-lambda^gamma).
  /// Kanter's representation.
  double stable_subordinator(double gamma) {
    const double u = kPi * uniform();  // Uniform(0, pi)
    const double e = exponential();
    const double su = std::sin(u);
    const double A = std::pow(std::sin(gamma * u), gamma / (1.0 - gamma)) *
                     std::sin((1.0 - gamma) * u) / std::pow(su, 1.0 / (1.0 - gamma));
    return std::pow(A / e, (1.0 - gamma) / gamma);
  }

  /// Isotropic alpha-stable increment in R^d at unit time,
  /// characteristic function exp(-|xi|^alpha). Subordinated Gaussian for d >= 2,
  /// direct CMS draw for d = 1.
  Vec stable_isotropic(double alpha, int d) {
    if (d == 1) {
      Vec x(1);
      x[0] = stable_symmetric(alpha);
      return x;
    }
    const double s = stable_subordinator(0.5 * alpha);
    const double scale = std::sqrt(2.0 * s);
    Vec z = gauss_vec(d);
    return scale * z;
  }

  /// Uniform point in the closed ball of given radius about the origin.
  Vec uniform_in_ball(int d, double radius) {
    if (d == 1) {
      Vec x(1);
      x[0] = uniform(-radius, radius);
      return x;
    }
    // Direction from an isotropic Gaussian, radius from the volume law.
    Vec z = gauss_vec(d);
    const double nz = norm(z);
    const double r = radius * std::pow(uniform(), 1.0 / d);
    return (r / nz) * z;
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hopflab
