#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstring>
#include <vector>

#include "hopflab/sampler.hpp"

using namespace hopflab;

namespace {

GeneratorSpec brownian(int d = 1) {
  GeneratorSpec s;
  s.dim = d;
  s.diffusion = DiffusionField::isotropic(d, 1.0);
  s.drift = VectorField::zero(d);
  return s;
}

GeneratorSpec stable_1d(double order) {
  GeneratorSpec s;
  s.dim = 1;
  s.diffusion = DiffusionField::zero(1);
  s.drift = VectorField::zero(1);
  s.jumps = IsotropicStable{order, 1.0};
  return s;
}

// Oracle: mean exit time of the isotropic stable process from the unit
// ball, started at the center: Gamma(d/2) / (2^s Gamma(1+s/2) Gamma((d+s)/2)).
double stable_ball_mean_exit(int d, double s) {
  return std::tgamma(0.5 * d) /
         (std::pow(2.0, s) * std::tgamma(1.0 + 0.5 * s) * std::tgamma(0.5 * (d + s)));
}

}  // namespace

TEST_CASE("deterministic transport exits at the far endpoint at the exact time") {
  GeneratorSpec s;
  s.dim = 1;
  s.diffusion = DiffusionField::zero(1);
  s.drift = VectorField(Vec{1.0});
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 1;
  const ExitRecord rec = simulate_exit(s, dom, Vec{0.5}, cfg);
  CHECK_FALSE(rec.censored);
  CHECK(rec.tau == Catch::Approx(0.5).margin(1e-3));
  CHECK(rec.x_exit[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(rec.exit_class == ExitClass::OnBoundary);
  CHECK_FALSE(rec.exit_by_jump);
}

// Oracle: E_x tau = x(1-x) for the half-Laplacian... the generator (1/2) u''
// on (0,1) solves (1/2) m'' = -1 with zero boundary values, m(x) = x(1-x).
TEST_CASE("Brownian interval mean exit time matches x(1-x)") {
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 20240811;
  cfg.workers = 2;
  const auto sum = simulate_batch(brownian(), dom, Vec{0.5}, cfg, 20000);
  CHECK(sum.censored == 0);
  CHECK(sum.exits_outside_range == 0);
  // Bias at dt = 1e-3 with the bridge test is well under 1e-3.
  CHECK(std::abs(sum.tau.value - 0.25) < 3.0 * sum.tau.stderr_ + 1.5e-3);
  // Every continuous exit lands exactly on an endpoint.
  std::vector<ExitRecord> recs;
  PathConfig cfg2 = cfg;
  const auto sum2 = simulate_batch(brownian(), dom, Vec{0.5}, cfg2, 500, &recs);
  (void)sum2;
  for (const auto& r : recs) {
    CHECK((r.x_exit[0] == 0.0 || r.x_exit[0] == 1.0));
    CHECK(r.exit_class == ExitClass::OnBoundary);
  }
}

TEST_CASE("stable interval mean exit time matches the ball law") {
  Domain dom(Interval{-1.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 7;
  const std::int64_t n = 20000;
  const auto sum = simulate_batch(stable_1d(1.0), dom, Vec{0.0}, cfg, n);
  const double oracle = stable_ball_mean_exit(1, 1.0);
  REQUIRE(oracle == Catch::Approx(1.0));  // the constants collapse at s=1, d=1
  CHECK(sum.censored == 0);
  CHECK(sum.exits_outside_range == 0);
  CHECK(sum.exits_by_jump > 0.9 * n);  // stable paths exit by jumps
  CHECK(std::abs(sum.tau.value - oracle) < 3.0 * sum.tau.stderr_ + 0.015);
}

TEST_CASE("batch summaries are bitwise identical across worker counts") {
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 99;
  GeneratorSpec s = brownian();
  s.killing = ScalarField(1.0);
  PathConfig c1 = cfg, c8 = cfg;
  c1.workers = 1;
  c8.workers = 8;
  const auto a = simulate_batch(s, dom, Vec{0.3}, c1, 6000);
  const auto b = simulate_batch(s, dom, Vec{0.3}, c8, 6000);
  CHECK(std::memcmp(&a.tau.value, &b.tau.value, sizeof(double)) == 0);
  CHECK(std::memcmp(&a.tau.stderr_, &b.tau.stderr_, sizeof(double)) == 0);
  CHECK(std::memcmp(&a.e_c.value, &b.e_c.value, sizeof(double)) == 0);
  CHECK(a.exits_on_boundary == b.exits_on_boundary);
  CHECK(a.exits_by_jump == b.exits_by_jump);
}

TEST_CASE("single-path simulation reproduces the batch record") {
  Domain dom(Interval{-1.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 4242;
  const GeneratorSpec s = stable_1d(1.5);
  std::vector<ExitRecord> recs;
  simulate_batch(s, dom, Vec{0.2}, cfg, 32, &recs);
  for (std::uint64_t k : {0ull, 7ull, 31ull}) {
    const ExitRecord solo = simulate_exit(s, dom, Vec{0.2}, cfg, k);
    CHECK(solo.tau == recs[k].tau);
    CHECK(solo.x_exit[0] == recs[k].x_exit[0]);
    CHECK(solo.e_c == recs[k].e_c);
  }
}

TEST_CASE("censoring at the horizon is flagged and bounded") {
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 0.05;
  cfg.seed = 5;
  std::vector<ExitRecord> recs;
  const auto sum = simulate_batch(brownian(), dom, Vec{0.5}, cfg, 2000, &recs);
  CHECK(sum.censored > 0);
  for (const auto& r : recs) {
    if (r.censored) {
      CHECK(r.tau == cfg.t_max);
      CHECK(r.exit_class == ExitClass::Interior);
      CHECK(r.x_exit[0] > 0.0);
      CHECK(r.x_exit[0] < 1.0);
    }
  }
}

TEST_CASE("killing integral scales exactly with the rate on a fixed path") {
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 11;
  GeneratorSpec s1 = brownian(), s10 = brownian();
  s1.killing = ScalarField(1.0);
  s10.killing = ScalarField(10.0);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const ExitRecord a = simulate_exit(s1, dom, Vec{0.4}, cfg, k);
    const ExitRecord b = simulate_exit(s10, dom, Vec{0.4}, cfg, k);
    REQUIRE(a.tau == b.tau);  // killing does not alter the trajectory
    REQUIRE(b.c_integral == Catch::Approx(10.0 * a.c_integral).epsilon(1e-12));
    REQUIRE(b.e_c <= a.e_c);
    REQUIRE(b.e_c == Catch::Approx(std::exp(-b.c_integral)));
  }
}

TEST_CASE("exit-location audit: jump kernels never land outside their range") {
  PathConfig cfg;
  cfg.dt = 2e-3;
  cfg.seed = 13;

  Domain dom(Interval{-1.0, 1.0});
  const auto stable_sum = simulate_batch(stable_1d(0.7), dom, Vec{0.1}, cfg, 20000);
  CHECK(stable_sum.exits_outside_range == 0);
  CHECK(stable_sum.exits_exterior_range > 0);

  GeneratorSpec cp = brownian();
  cp.jumps = CompoundPoisson{ScalarField(2.0), JumpDistribution::uniform_ball(0.5)};
  Domain dom01(Interval{0.0, 1.0});
  const auto cp_sum = simulate_batch(cp, dom01, Vec{0.5}, cfg, 20000);
  CHECK(cp_sum.exits_outside_range == 0);
  CHECK(cp_sum.exits_by_jump > 0);
}

TEST_CASE("martingale residual vanishes for generator pairs") {
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 17;
  Domain big(Interval{-100.0, 100.0});

  SECTION("constant function gives an exactly zero residual") {
    const auto est = martingale_residual(
        brownian(), big, [](const Vec&) { return 3.0; }, [](const Vec&) { return 0.0; },
        Vec{0.0}, 0.2, 500, cfg);
    CHECK(est.value == 0.0);
    CHECK(est.stderr_ == 0.0);
  }

  SECTION("Brownian with f = x^2, Af = 1") {
    const auto est = martingale_residual(
        brownian(), big, [](const Vec& x) { return x[0] * x[0]; },
        [](const Vec&) { return 1.0; }, Vec{0.0}, 0.2, 20000, cfg);
    CHECK(std::abs(est.value) < 4.0 * est.stderr_ + 1e-12);
  }

  SECTION("drift-diffusion with f = x, Af = b") {
    GeneratorSpec s = brownian();
    s.drift = VectorField(Vec{1.0});
    const auto est = martingale_residual(
        s, big, [](const Vec& x) { return x[0]; }, [](const Vec&) { return 1.0; }, Vec{0.0},
        0.2, 20000, cfg);
    CHECK(std::abs(est.value) < 4.0 * est.stderr_ + 1e-12);
  }

  SECTION("compound Poisson with f = x^2, Af = rate E[J^2]") {
    GeneratorSpec s;
    s.dim = 1;
    s.diffusion = DiffusionField::zero(1);
    s.jumps = CompoundPoisson{ScalarField(2.0), JumpDistribution::uniform_ball(0.5)};
    const double af = 2.0 * (0.5 * 0.5 / 3.0);  // rate * E J^2, uniform on (-1/2,1/2)
    const auto est = martingale_residual(
        s, big, [](const Vec& x) { return x[0] * x[0]; }, [af](const Vec&) { return af; },
        Vec{0.0}, 0.5, 20000, cfg);
    CHECK(std::abs(est.value) < 4.0 * est.stderr_ + 1e-12);
  }
}

TEST_CASE("halving dt moves the Brownian exit mean by less than noise") {
  Domain dom(Interval{0.0, 1.0});
  PathConfig coarse, fine;
  coarse.dt = 2e-3;
  fine.dt = 1e-3;
  coarse.seed = fine.seed = 23;
  const auto a = simulate_batch(brownian(), dom, Vec{0.5}, coarse, 20000);
  const auto b = simulate_batch(brownian(), dom, Vec{0.5}, fine, 20000);
  const double combined = std::hypot(a.tau.stderr_, b.tau.stderr_);
  CHECK(std::abs(a.tau.value - b.tau.value) < 3.0 * combined + 2e-3);
}

TEST_CASE("antithetic pairing stays unbiased and deterministic") {
  Domain dom(Interval{0.0, 1.0});
  PathConfig cfg;
  cfg.dt = 1e-3;
  cfg.seed = 29;
  cfg.antithetic = true;
  const auto a = simulate_batch(brownian(), dom, Vec{0.5}, cfg, 20000);
  CHECK(std::abs(a.tau.value - 0.25) < 3.0 * a.tau.stderr_ + 1.5e-3);
  PathConfig c8 = cfg;
  c8.workers = 8;
  const auto b = simulate_batch(brownian(), dom, Vec{0.5}, c8, 20000);
  CHECK(a.tau.value == b.tau.value);
}

TEST_CASE("truncated stable rule approximates the exact-increment law") {
  Domain dom(Interval{-1.0, 1.0});
  PathConfig exact, trunc;
  exact.dt = 1e-3;
  exact.seed = 31;
  trunc = exact;
  trunc.stable_rule = StableStepRule::CompoundTruncation;
  trunc.truncation_cut = 5e-3;
  const auto a = simulate_batch(stable_1d(1.0), dom, Vec{0.0}, exact, 20000);
  const auto b = simulate_batch(stable_1d(1.0), dom, Vec{0.0}, trunc, 20000);
  const double combined = std::hypot(a.tau.stderr_, b.tau.stderr_);
  CHECK(std::abs(a.tau.value - b.tau.value) < 3.0 * combined + 0.03);
}
