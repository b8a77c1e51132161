#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "hopflab/functional.hpp"

using namespace hopflab;

namespace {

GeneratorSpec brownian_killed(double c) {
  GeneratorSpec s;
  s.dim = 1;
  s.diffusion = DiffusionField::isotropic(1, 1.0);
  s.drift = VectorField::zero(1);
  s.killing = ScalarField(c);
  return s;
}

// Oracle: for (1/2) u'' = c u on (0,1) with u = 1 on the boundary the
// solution is cosh(sqrt(2c)(x - 1/2)) / cosh(sqrt(2c)/2).
double gauge_closed_form(double c, double x) {
  const double k = std::sqrt(2.0 * c);
  return std::cosh(k * (x - 0.5)) / std::cosh(0.5 * k);
}

// Oracle: (1/2) u'' - beta u = -1 on (0,1), zero boundary values:
// u(x) = (1/beta) (1 - cosh(sqrt(2 beta)(x - 1/2)) / cosh(sqrt(2 beta)/2)).
double resolvent_of_one(double beta, double x) {
  return (1.0 - gauge_closed_form(beta, x)) / beta;
}

}  // namespace

TEST_CASE("gauge without killing is exactly one") {
  GeneratorSpec s = brownian_killed(0.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 11;
  const GaugePair g = gauge(s, dom, Vec{0.4}, cfg, 2000);
  CHECK(g.v.value == 1.0);
  CHECK(g.v.stderr_ == 0.0);
  CHECK(g.w.value == 0.0);
  CHECK(g.censored == 0);
  CHECK(g.v.bias_bound == 0.0);
}

TEST_CASE("gauge matches the hyperbolic-cosine solution under unit killing") {
  GeneratorSpec s = brownian_killed(1.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 12;
  const std::int64_t n = 40000;
  for (double x : {0.25, 0.5}) {
    const GaugePair g = gauge(s, dom, Vec{x}, cfg, n);
    const double truth = gauge_closed_form(1.0, x);
    CAPTURE(x, g.v.value, truth);
    CHECK(std::abs(g.v.value - truth) < 3.0 * g.v.stderr_ + 2.5e-3);
    CHECK(g.w.value == 1.0 - g.v.value);
    CHECK(g.censored == 0);
  }
}

TEST_CASE("gauge identity against the closed-form gauge oracle") {
  GeneratorSpec s = brownian_killed(1.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 13;
  auto oracle = [](const Vec& y) { return gauge_closed_form(1.0, y[0]); };
  const std::vector<Vec> probes = {Vec{0.2}, Vec{0.35}, Vec{0.5}, Vec{0.65}, Vec{0.8}};
  const auto checks = gauge_identity_check(s, dom, probes, oracle, cfg, 20000, 3e-3);
  REQUIRE(checks.size() == probes.size());
  for (const auto& pc : checks) {
    CAPTURE(pc.x[0], pc.lhs, pc.rhs, pc.allowance);
    CHECK(pc.pass);
    CHECK(std::abs(pc.lhs - (1.0 - gauge_closed_form(1.0, pc.x[0]))) < 0.02);
  }
}

TEST_CASE("semigroup at time zero returns the data exactly") {
  GeneratorSpec s = brownian_killed(0.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.seed = 14;
  auto f = [](const Vec& x) { return std::sin(kPi * x[0]); };
  const Estimate e = semigroup_apply(s, dom, f, 0.0, Vec{0.3}, cfg, 100);
  CHECK(e.value == std::sin(kPi * 0.3));
  CHECK(e.stderr_ == 0.0);
}

// Oracle: sin(pi x) is an eigenfunction of the absorbed half-Laplacian on
// (0,1), so P_t sin(pi .)(x) = exp(-pi^2 t / 2) sin(pi x).
TEST_CASE("semigroup contracts the principal eigenfunction at the exact rate") {
  GeneratorSpec plain = brownian_killed(0.0);
  GeneratorSpec killed = brownian_killed(1.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 2e-4;
  cfg.seed = 15;
  auto f = [](const Vec& x) { return std::sin(kPi * x[0]); };
  const double t = 0.1;
  const std::int64_t n = 60000;
  const Estimate e = semigroup_apply(plain, dom, f, t, Vec{0.5}, cfg, n);
  const double truth = std::exp(-0.5 * kPi * kPi * t);
  CAPTURE(e.value, truth);
  CHECK(std::abs(e.value - truth) < 3.0 * e.stderr_ + 4e-3);

  // Constant killing multiplies every path weight by the same e^{-ct}.
  const Estimate ek = semigroup_apply(killed, dom, f, t, Vec{0.5}, cfg, n, true);
  CHECK(ek.value == Catch::Approx(std::exp(-t) * e.value).epsilon(1e-10));
}

TEST_CASE("resolvent of unit data at zero discount is the mean exit time") {
  GeneratorSpec s = brownian_killed(0.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 16;
  auto one = [](const Vec&) { return 1.0; };
  const std::int64_t n = 40000;
  const Estimate r = resolvent_apply(s, dom, one, 0.0, Vec{0.3}, cfg, n);
  CHECK(std::abs(r.value - 0.3 * 0.7) < 3.0 * r.stderr_ + 2e-3);
  CHECK(r.bias_bound == 0.0);

  // Pathwise the accumulated occupation of 1 is the exit time itself, so the
  // estimator must agree with the exit-time summary from the same seed.
  const BatchSummary b = simulate_batch(s, dom, Vec{0.3}, cfg, n);
  CHECK(r.value == Catch::Approx(b.tau.value).epsilon(1e-13));
}

TEST_CASE("resolvent identity against the closed-form composed oracle") {
  GeneratorSpec s = brownian_killed(0.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 17;
  auto one = [](const Vec&) { return 1.0; };
  auto rbeta = [](const Vec& y) { return resolvent_of_one(2.0, y[0]); };
  const std::vector<Vec> probes = {Vec{0.25}, Vec{0.5}, Vec{0.75}};
  const auto checks =
      resolvent_identity_check(s, dom, probes, one, 1.0, 2.0, rbeta, cfg, 20000, 2e-3);
  REQUIRE(checks.size() == 3);
  for (const auto& pc : checks) {
    CAPTURE(pc.x[0], pc.lhs, pc.rhs, pc.allowance);
    CHECK(pc.pass);
    // The left side itself has a closed form; pin it loosely as well.
    const double truth = resolvent_of_one(1.0, pc.x[0]) - resolvent_of_one(2.0, pc.x[0]);
    CHECK(std::abs(pc.lhs - truth) < 0.01);
  }
}

TEST_CASE("censored gauge stays one-sided with an honest bias bound") {
  GeneratorSpec s = brownian_killed(1.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 0.05;
  cfg.seed = 18;
  const std::int64_t n = 20000;
  const GaugePair g = gauge(s, dom, Vec{0.5}, cfg, n);
  const double truth = gauge_closed_form(1.0, 0.5);
  CHECK(g.censored > 0);
  CHECK(g.v.bias_bound > 0.0);
  // Zero-contribution censoring can only undershoot.
  CHECK(g.v.value < truth);
  CHECK(g.v.value + g.v.bias_bound + 3.0 * g.v.stderr_ > truth);
}

TEST_CASE("undiscounted resolvent with censored paths reports unbounded bias") {
  GeneratorSpec s = brownian_killed(0.0);
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 0.05;
  cfg.seed = 19;
  auto one = [](const Vec&) { return 1.0; };
  const Estimate r0 = resolvent_apply(s, dom, one, 0.0, Vec{0.5}, cfg, 5000);
  CHECK(std::isinf(r0.bias_bound));
  CHECK(std::isfinite(r0.value));

  const Estimate r2 = resolvent_apply(s, dom, one, 2.0, Vec{0.5}, cfg, 5000);
  CHECK(std::isfinite(r2.bias_bound));
  CHECK(r2.bias_bound > 0.0);
  const double truth = resolvent_of_one(2.0, 0.5);
  CHECK(r2.value < truth + 3.0 * r2.stderr_ + 1e-3);
  CHECK(r2.value + r2.bias_bound + 3.0 * r2.stderr_ + 1e-3 > truth);

  // A positive killing floor also caps the censored remainder.
  GeneratorSpec sk = brownian_killed(1.0);
  const Estimate rk = resolvent_apply(sk, dom, one, 0.0, Vec{0.5}, cfg, 5000, true);
  CHECK(std::isfinite(rk.bias_bound));
}
