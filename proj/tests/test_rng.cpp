#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "hopflab/rng.hpp"

using hopflab::Rng;
using hopflab::Vec;

TEST_CASE("substreams are reproducible and distinct") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool all_equal_ab = true, any_equal_ac = false;
  for (int i = 0; i < 64; ++i) {
    const auto xa = a(), xb = b(), xc = c();
    all_equal_ab = all_equal_ab && (xa == xb);
    any_equal_ac = any_equal_ac || (xa == xc);
  }
  CHECK(all_equal_ab);
  CHECK_FALSE(any_equal_ac);
}

TEST_CASE("uniform stays inside the open unit interval") {
  Rng r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("gauss has unit variance") {
  Rng r(2, 0);
  const int n = 200000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.gauss();
    s += x;
    ss += x * x;
  }
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  // stderr of the mean is 1/sqrt(n) ~ 0.0022, of the variance ~ sqrt(2/n) ~ 0.0032
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

// Oracle: the characteristic function of a standard symmetric alpha-stable
// variable is exp(-|xi|^alpha). The sampler must reproduce it within
// Monte Carlo error for a spread of orders and frequencies.
TEST_CASE("symmetric stable matches its characteristic function") {
  const int n = 200000;
  for (double alpha : {0.5, 1.0, 1.5}) {
    Rng r(3, static_cast<std::uint64_t>(alpha * 100));
    std::vector<double> xs(n);
    for (auto& x : xs) x = r.stable_symmetric(alpha);
    for (double xi : {0.5, 1.0, 2.0}) {
      double acc = 0;
      for (double x : xs) acc += std::cos(xi * x);
      const double expect = std::exp(-std::pow(xi, alpha));
      // Var(cos) <= 1/2, so 6 sigma is about 0.0095 at this n.
      CHECK(std::abs(acc / n - expect) < 6.0 / std::sqrt(2.0 * n));
    }
  }
}

// Oracle: Laplace transform of the one-sided stable of index gamma is
// exp(-lambda^gamma).
TEST_CASE("stable subordinator matches its Laplace transform") {
  const int n = 200000;
  for (double gamma : {0.25, 0.5, 0.75}) {
    Rng r(4, static_cast<std::uint64_t>(gamma * 100));
    std::vector<double> xs(n);
    for (auto& x : xs) x = r.stable_subordinator(gamma);
    for (double lam : {0.5, 1.0, 2.0}) {
      double acc = 0;
      for (double x : xs) acc += std::exp(-lam * x);
      const double expect = std::exp(-std::pow(lam, gamma));
      CHECK(std::abs(acc / n - expect) < 6.0 / std::sqrt(2.0 * n));
    }
  }
}

// Oracle: the isotropic stable law in R^d has characteristic function
// exp(-|xi|^alpha) for every direction.
TEST_CASE("isotropic stable in R^2 matches its characteristic function") {
  const int n = 200000;
  for (double alpha : {1.0, 1.5}) {
    Rng r(5, static_cast<std::uint64_t>(alpha * 100));
    std::vector<Vec> xs(n, Vec(2));
    for (auto& x : xs) x = r.stable_isotropic(alpha, 2);
    const Vec dirs[] = {Vec{1.0, 0.0}, Vec{0.6, 0.8}};
    for (const Vec& dir : dirs) {
      for (double rho : {0.5, 1.0}) {
        double acc = 0;
        for (const Vec& x : xs) acc += std::cos(rho * dot(dir, x));
        const double expect = std::exp(-std::pow(rho, alpha));
        CHECK(std::abs(acc / n - expect) < 6.0 / std::sqrt(2.0 * n));
      }
    }
  }
}

TEST_CASE("uniform ball sample has the exact radial second moment") {
  const int n = 200000;
  for (int d : {1, 2, 3}) {
    Rng r(6, static_cast<std::uint64_t>(d));
    double smax = 0, s2 = 0;
    Vec mean(d);
    for (int i = 0; i < n; ++i) {
      const Vec x = r.uniform_in_ball(d, 0.5);
      smax = std::max(smax, norm(x));
      s2 += norm2(x);
      mean += x;
    }
    CHECK(smax <= 0.5 + 1e-12);
    // E|X|^2 = r^2 d/(d+2) for the uniform law on a ball of radius r.
    const double expect = 0.25 * d / (d + 2.0);
    CHECK(std::abs(s2 / n - expect) < 6.0 * expect / std::sqrt(static_cast<double>(n)));
    for (int k = 0; k < d; ++k) CHECK(std::abs(mean[k] / n) < 0.01);
  }
}
