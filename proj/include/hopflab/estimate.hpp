#pragma once

#include <cmath>
#include <cstdint>

namespace hopflab {

/// Monte Carlo estimate with quantified uncertainty. bias_bound is a
/// one-sided bound on systematic error from path censoring; statistical
/// error is carried separately in stderr.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  double bias_bound = 0.0;

  /// Half-width of the k-sigma interval including the bias allowance.
  double margin(double k = 3.0) const { return k * stderr_ + bias_bound; }
};

/// Difference of independent estimates; uncertainties combine in quadrature.
inline Estimate operator-(const Estimate& a, const Estimate& b) {
  Estimate e;
  e.value = a.value - b.value;
  e.stderr_ = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
  e.n = a.n < b.n ? a.n : b.n;
  e.seed = a.seed;
  e.bias_bound = a.bias_bound + b.bias_bound;
  return e;
}

}  // namespace hopflab
