#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hopflab {

/// Maximum spatial dimension supported by the point type.
inline constexpr int kMaxDim = 8;

inline constexpr double kPi = 3.14159265358979323846;

/// Fixed-capacity point in R^d, d <= kMaxDim. Cheap to copy, no allocation.
struct Vec {
  std::array<double, kMaxDim> a{};
  int d = 1;

  Vec() = default;
  explicit Vec(int dim) : d(dim) {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Vec: dim out of range");
  }
  Vec(std::initializer_list<double> xs) : d(static_cast<int>(xs.size())) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("Vec: dim out of range");
    std::copy(xs.begin(), xs.end(), a.begin());
  }
  static Vec zero(int dim) { return Vec(dim); }
  static Vec scalar(double x) { return Vec{x}; }

  double& operator[](int i) { return a[static_cast<size_t>(i)]; }
  double operator[](int i) const { return a[static_cast<size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < d; ++i) a[i] += o.a[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < d; ++i) a[i] -= o.a[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < d; ++i) a[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec x, const Vec& y) { return x += y; }
  friend Vec operator-(Vec x, const Vec& y) { return x -= y; }
  friend Vec operator*(double s, Vec x) { return x *= s; }
  friend Vec operator*(Vec x, double s) { return x *= s; }
  friend Vec operator-(Vec x) {
    for (int i = 0; i < x.d; ++i) x.a[i] = -x.a[i];
    return x;
  }
};

inline double dot(const Vec& x, const Vec& y) {
  double s = 0;
  for (int i = 0; i < x.d; ++i) s += x[i] * y[i];
  return s;
}
inline double norm2(const Vec& x) { return dot(x, x); }
inline double norm(const Vec& x) { return std::sqrt(norm2(x)); }

inline double sqr(double x) { return x * x; }

/// Surface measure of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
inline double sphere_surface(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Volume of the unit ball in R^d.
inline double ball_volume(int d) { return sphere_surface(d) / d; }

namespace detail {

/// Adaptive Simpson on [a,b] with absolute tolerance tol.
template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10, int depth = 40) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

/// FNV-1a 64-bit over a byte string. Used for cache keys and report hashes.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Sample statistics with deterministic block-pairwise accumulation.
/// Values are reduced in index order, independent of thread scheduling.
/// Welford accumulator with pairwise merging. Identical inputs yield an
/// exact mean and zero variance, which downstream exactness checks rely on.
/// Any non-finite sample saturates the whole accumulator to +infinity; bias
/// chains use that to report an unbounded error honestly.
struct RunningStats {
  double mean_ = 0, m2_ = 0;
  std::int64_t n = 0;
  bool saturated = false;
  void add(double x) {
    ++n;
    if (!std::isfinite(x)) {
      saturated = true;
      return;
    }
    const double d = x - mean_;
    mean_ += d / n;
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o) {
    if (o.n == 0) return;
    saturated = saturated || o.saturated;
    if (n == 0) {
      *this = o;
      return;
    }
    const double d = o.mean_ - mean_;
    const std::int64_t nt = n + o.n;
    mean_ += d * o.n / nt;
    m2_ += o.m2_ + d * d * (static_cast<double>(n) * o.n / nt);
    n = nt;
  }
  double mean() const {
    if (saturated) return std::numeric_limits<double>::infinity();
    return n > 0 ? mean_ : 0.0;
  }
  double variance() const {
    if (saturated) return std::numeric_limits<double>::infinity();
    return n < 2 ? 0.0 : std::max(0.0, m2_ / (n - 1));
  }
  double stderr_mean() const { return n > 0 ? std::sqrt(variance() / n) : 0.0; }
};

}  // namespace hopflab
