// End-to-end acceptance gate. Each numbered check prints one PASS/FAIL line
// against a closed-form oracle or a structural guarantee; the binary exits
// nonzero when any check fails. Budget: a few minutes single-threaded, the
// dense stable matrices in check 8 dominating.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hopflab/cache.hpp"
#include "hopflab/config.hpp"
#include "hopflab/doob.hpp"
#include "hopflab/runner.hpp"
#include "hopflab/verify.hpp"

using namespace hopflab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::chrono::steady_clock::time_point g_t0;

void record(int id, bool pass, const std::string& what, const std::string& detail) {
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - g_t0).count();
  std::printf("[%02d] %s  %s  (%s; t=%.1fs)\n", id, pass ? "PASS" : "FAIL", what.c_str(),
              detail.c_str(), elapsed);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void record_error(int id, const std::string& what, const std::exception& e) {
  record(id, false, what, std::string("exception: ") + e.what());
}

GeneratorSpec brownian(double c) {
  GeneratorSpec s;
  s.dim = 1;
  s.diffusion = DiffusionField::isotropic(1, 1.0);
  s.drift = VectorField::zero(1);
  s.killing = ScalarField(c);
  return s;
}

GeneratorSpec stable_process(double order, double c) {
  GeneratorSpec s;
  s.dim = 1;
  s.diffusion = DiffusionField::zero(1);
  s.drift = VectorField::zero(1);
  s.jumps = IsotropicStable{order, 1.0};
  s.killing = ScalarField(c);
  return s;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempTree {
  fs::path path;
  TempTree() {
    path = fs::temp_directory_path() / ("hopflab-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempTree() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

int main() {
  g_t0 = std::chrono::steady_clock::now();
  const Domain unit(Interval{0.0, 1.0});
  const Domain sym(Interval{-1.0, 1.0});
  const std::vector<Vec> probes = {Vec{0.25}, Vec{0.5}, Vec{0.75}};
  TempTree tmp;

  // 1. Mean exit time of Brownian motion from the unit interval started at
  //    the midpoint: E tau = x(1-x) = 1/4.
  try {
    PathConfig cfg;
    cfg.dt = 1e-4;
    cfg.seed = 101;
    const BatchSummary b = simulate_batch(brownian(0.0), unit, Vec{0.5}, cfg, 100000);
    const double rel = std::abs(b.tau.value - 0.25) / 0.25;
    record(1, rel <= 0.01, "brownian mean exit time at the midpoint",
           "mean " + fmt(b.tau.value) + " vs 0.25, rel err " + fmt(rel));
  } catch (const std::exception& e) {
    record_error(1, "brownian mean exit time at the midpoint", e);
  }

  // 2. + 7a. Mean exit time of the order-1 stable process from (-1,1) at the
  //    origin: closed form gives exactly 1. The same batch must classify no
  //    exit as beyond the reachable range.
  BatchSummary stable_batch;
  bool have_stable_batch = false;
  try {
    PathConfig cfg;
    cfg.dt = 1e-3;
    cfg.seed = 102;
    cfg.t_max = 200.0;
    stable_batch = simulate_batch(stable_process(1.0, 0.0), sym, Vec{0.0}, cfg, 100000);
    have_stable_batch = true;
    const double rel = std::abs(stable_batch.tau.value - 1.0);
    record(2, rel <= 0.02, "stable order-1 mean exit time at the origin",
           "mean " + fmt(stable_batch.tau.value) + " vs 1, rel err " + fmt(rel));
  } catch (const std::exception& e) {
    record_error(2, "stable order-1 mean exit time at the origin", e);
  }

  // 3. Survival weight under unit killing at the midpoint: the ODE solution
  //    is cosh(sqrt2 (x-1/2))/cosh(sqrt2/2), so v(1/2) = 1/cosh(sqrt(1/2)).
  try {
    PathConfig cfg;
    cfg.dt = 2e-4;
    cfg.seed = 103;
    const GaugePair g = gauge(brownian(1.0), unit, Vec{0.5}, cfg, 20000);
    const double oracle = 1.0 / std::cosh(std::sqrt(0.5));
    const double err = std::abs(g.v.value - oracle);
    const double tol = std::max(3.0 * g.v.stderr_, 1e-2);
    record(3, err <= tol, "survival weight under unit killing at the midpoint",
           "value " + fmt(g.v.value) + " vs " + fmt(oracle) + ", err " + fmt(err) + " tol " +
               fmt(tol));
  } catch (const std::exception& e) {
    record_error(3, "survival weight under unit killing at the midpoint", e);
  }

  // 4. Complement identity w = R(c v): Monte Carlo both sides at five probes
  //    with the grid interpolant supplying v under the integral.
  try {
    const GeneratorSpec s = brownian(1.0);
    const GridOperator G = discretize(s, unit, 1e-3);
    const Subsolution v = make_gauge_solution(G);
    PathConfig cfg;
    cfg.dt = 1e-3;
    cfg.seed = 13;
    const std::vector<Vec> five = {Vec{0.2}, Vec{0.35}, Vec{0.5}, Vec{0.65}, Vec{0.8}};
    const auto checks = gauge_identity_check(s, unit, five, v.values, cfg, 20000, 3e-3);
    bool all = true;
    double worst = 0;
    for (const auto& pc : checks) {
      all = all && pc.pass;
      worst = std::max(worst, std::abs(pc.lhs - pc.rhs) - pc.allowance);
    }
    record(4, all, "killing-mass identity for the survival complement",
           fmt(checks.size()) + " probes, worst slack use " + fmt(worst));
  } catch (const std::exception& e) {
    record_error(4, "killing-mass identity for the survival complement", e);
  }

  // 5. Principal eigenvalue and eigenfunction of the absorbed Laplacian on
  //    the unit interval: pi^2/2 and sin(pi x).
  try {
    const GridOperator G = discretize(brownian(0.0), unit, 1e-3);
    const EigenPair pair = principal_eigenpair(G);
    const double lam0 = M_PI * M_PI / 2.0;
    const double rel = std::abs(pair.lambda - lam0) / lam0;
    double sup = 0;
    for (int i = 0; i < G.size(); ++i) {
      const double ref = std::sin(M_PI * G.nodes[static_cast<size_t>(i)][0]);
      sup = std::max(sup, std::abs(pair.phi[i] / pair.phi_sup - ref));
    }
    record(5, pair.converged && rel <= 0.005 && sup <= 1e-2,
           "principal eigenpair of the absorbed interval Laplacian",
           "lambda " + fmt(pair.lambda) + " rel err " + fmt(rel) + ", shape sup err " + fmt(sup));
  } catch (const std::exception& e) {
    record_error(5, "principal eigenpair of the absorbed interval Laplacian", e);
  }

  // 6. Resolvent identity R_a - R_b = (b-a) R_a R_b: exact on the grid, and
  //    Monte Carlo against the grid interpolant at three probes.
  try {
    const GeneratorSpec s = brownian(0.0);
    const GridOperator G = discretize(s, unit, 1e-3);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(G.size());
    const std::vector<std::pair<double, double>> combos = {{1, 2}, {1, 3}, {2, 2}, {2, 3}};
    double grid_worst = 0;
    bool mc_all = true;
    int combo_idx = 0;
    for (const auto& [a, b] : combos) {
      const Eigen::VectorXd ra = grid_resolvent(G, a, ones);
      const Eigen::VectorXd rb = grid_resolvent(G, b, ones);
      const Eigen::VectorXd comp = grid_resolvent(G, a, rb);
      grid_worst = std::max(grid_worst, (ra - rb - (b - a) * comp).lpNorm<Eigen::Infinity>());
      PathConfig cfg;
      cfg.dt = 1e-3;
      cfg.seed = 17 + 10 * combo_idx++;
      auto rb_fn = [&G, rb](const Vec& x) { return G.interpolate(rb, x); };
      const auto checks = resolvent_identity_check(
          s, unit, probes, [](const Vec&) { return 1.0; }, a, b, rb_fn, cfg, 20000, 2e-3);
      for (const auto& pc : checks) mc_all = mc_all && pc.pass;
    }
    record(6, grid_worst <= 1e-8 && mc_all, "resolvent identity, grid and sampled",
           "grid sup defect " + fmt(grid_worst) + ", 4 rate pairs x 3 probes sampled");
  } catch (const std::exception& e) {
    record_error(6, "resolvent identity, grid and sampled", e);
  }

  // 7. Exit-location classification: single jumps land inside the reachable
  //    range, so no path may ever be classified beyond it. Full-support
  //    stable jumps (batch from check 2) and bounded compound-Poisson jumps.
  try {
    GeneratorSpec cp;
    cp.dim = 1;
    cp.diffusion = DiffusionField::zero(1);
    cp.drift = VectorField::zero(1);
    cp.jumps = CompoundPoisson{ScalarField(2.0), JumpDistribution::uniform_ball(0.3)};
    PathConfig cfg;
    cfg.dt = 5e-3;
    cfg.seed = 107;
    cfg.t_max = 200.0;
    const BatchSummary b = simulate_batch(cp, unit, Vec{0.5}, cfg, 100000);
    const bool ok = have_stable_batch && stable_batch.exits_outside_range == 0 &&
                    b.exits_outside_range == 0 && b.exits_by_jump > 0;
    record(7, ok, "no exit ever classified beyond the reachable range",
           "stable outside " + fmt(have_stable_batch ? double(stable_batch.exits_outside_range) : -1.0) +
               ", compound-poisson outside " + fmt(double(b.exits_outside_range)) + " over 2x1e5 paths");
  } catch (const std::exception& e) {
    record_error(7, "no exit ever classified beyond the reachable range", e);
  }

  // 8. Boundary decay of the stable eigenfunction: phi ~ dist^(s/2) in a
  //    boundary window, fitted exponent within 0.1 at three orders.
  try {
    bool all = true;
    std::string detail;
    for (double s : {0.5, 1.0, 1.5}) {
      const GridOperator G = discretize(stable_process(s, 0.0), sym, 2e-3);
      const EigenPair pair = principal_eigenpair(G);
      const ScalingFit fit = boundary_scaling_fit(G, pair.phi, 0.04);
      const bool ok = pair.converged && std::abs(fit.gamma - s / 2.0) <= 0.1;
      all = all && ok;
      detail += "s=" + fmt(s) + ":" + fmt(fit.gamma) + " ";
    }
    record(8, all, "eigenfunction boundary decay exponent s/2", detail + "window 0.04");
  } catch (const std::exception& e) {
    record_error(8, "eigenfunction boundary decay exponent s/2", e);
  }

  // 9. One scaling function for a ten-member family on both fixture
  //    operators, plus tightness of the boundary-mass bound on the survival
  //    weight itself.
  try {
    bool all = true;
    std::string detail;
    int fx = 0;
    for (const GeneratorSpec& s : {brownian(1.0), stable_process(1.0, 1.0)}) {
      const GridOperator Gc = discretize(s, unit, 2e-3);
      std::vector<Subsolution> family;
      family.push_back(make_gauge_solution(Gc));
      for (double a : {0.1, 0.5, 2.0})
        family.push_back(scale_subsolution(family.front(), a, "gauge-scaled-" + fmt(a)));
      PathConfig dcfg;
      dcfg.dt = 1e-3;
      dcfg.seed = 900 + fx;
      const std::vector<Vec> ext = {Vec{-0.5}, Vec{1.5}};
      family.push_back(make_dirichlet_solution(
          s, unit, [](const Vec&) { return 1.0; }, ScalarField(1.0), ScalarField(0.0),
          {0.25, 0.5, 0.75}, ext, dcfg, 20000, "exit-data-constant"));
      family.push_back(make_dirichlet_solution(
          s, unit, [](const Vec& y) { return 1.0 / (1.0 + y[0] * y[0]); }, ScalarField(1.0),
          ScalarField(0.0), {0.25, 0.5, 0.75}, ext, dcfg, 20000, "exit-data-cauchy"));
      family.push_back(make_dirichlet_solution(
          s, unit, [](const Vec& y) { return std::exp(-(y[0] - 1.5) * (y[0] - 1.5)); },
          ScalarField(1.0), ScalarField(0.0), {0.25, 0.5, 0.75}, ext, dcfg, 20000,
          "exit-data-bump"));
      family.push_back(make_resolvent_subsolution(Gc, [](const Vec&) { return 1.0; }, 0.0));
      family.push_back(
          make_resolvent_subsolution(Gc, [](const Vec& y) { return y[0] * (1.0 - y[0]); }, 1.0));
      family.push_back(make_resolvent_subsolution(
          Gc, [](const Vec& y) { return y[0] > 0.4 && y[0] < 0.6 ? 1.0 : 0.0; }, 0.5));

      const FamilyReport fam = check_quantitative_hopf_family(Gc, family, probes, 1e-9);
      // The equality case carries no allowance beyond sampling noise, so the
      // time step must push the discretization bias well under one sigma.
      PathConfig ecfg;
      ecfg.dt = 5e-5;
      ecfg.seed = 910 + fx;
      const HopfReport eq = check_gauge_hopf(family.front(), s, unit, probes, ecfg, 20000);
      bool tight = true;
      double worst_eq = 0;
      for (const auto& pr : eq.probes) {
        tight = tight && std::abs(pr.margin) <= 3.0 * pr.sigma;
        worst_eq = std::max(worst_eq, std::abs(pr.margin));
      }
      all = all && fam.pass && tight;
      detail += std::string(fx ? "stable" : "brownian") + " worst margin " +
                fmt(fam.worst_margin) + " eq |margin| " + fmt(worst_eq) + "; ";
      ++fx;
    }
    record(9, all, "shared scaling bound across a ten-member family", detail + "3 probes each");
  } catch (const std::exception& e) {
    record_error(9, "shared scaling bound across a ten-member family", e);
  }

  // 10. Rank-one kernel lower bound and geometric chain mixing certify each
  //     other on both fixtures.
  try {
    bool all = true;
    std::string detail;
    int fx = 0;
    for (const GeneratorSpec& s : {brownian(1.0), stable_process(1.0, 1.0)}) {
      const GridOperator Gc = discretize(s, unit, 4e-3);
      const MinorizationCertificate cert = minorization_certificate(Gc, 1.0);
      const EigenPair pair = principal_eigenpair(Gc);
      const ErgodicityReport erg = tv_ergodicity(resolvent_chain(Gc, pair, 1.0));
      const PhiMinorization pm = minorization_phi_check(cert, pair);
      const bool ok = cert.ok && cert.nu.maxCoeff() > 0 && erg.fitted && erg.rho < 1.0 &&
                      erg.r2 >= 0.99 && pm.holds && pm.c_min > 0;
      all = all && ok;
      detail += std::string(fx ? "stable" : "brownian") + " rho " + fmt(erg.rho) + " r2 " +
                fmt(erg.r2) + " c_min " + fmt(pm.c_min) + "; ";
      ++fx;
    }
    record(10, all, "kernel minorization and geometric mixing agree", detail);
  } catch (const std::exception& e) {
    record_error(10, "kernel minorization and geometric mixing agree", e);
  }

  // 11. Conditioned-on-survival law: uniform TV convergence to the
  //     stationary profile, which for Brownian motion is (pi/2) sin(pi x).
  try {
    const GridOperator G = discretize(brownian(0.0), unit, 2e-3);
    const EigenPair pair = principal_eigenpair(G);
    const QsdReport rep = qsd(G, pair, {0.1, 0.2, 0.4, 0.7, 1.0, 1.3});
    bool decreasing = true;
    for (size_t k = 1; k < rep.profile.size(); ++k)
      decreasing = decreasing && rep.profile[k] < rep.profile[k - 1];
    double sup = 0;
    for (int i = 0; i < G.size(); ++i) {
      const double ref = 0.5 * M_PI * std::sin(M_PI * G.nodes[static_cast<size_t>(i)][0]);
      sup = std::max(sup, std::abs(rep.pi[i] / G.cell - ref));
    }
    record(11, decreasing && rep.profile.back() < 1e-6 && sup <= 1e-3,
           "conditioned law converges to the sine profile",
           "final tv " + fmt(rep.profile.back()) + ", density sup err " + fmt(sup));
  } catch (const std::exception& e) {
    record_error(11, "conditioned law converges to the sine profile", e);
  }

  // 12. Two-sided heat-kernel comparability with the eigenfunction product:
  //     finite positive ratios whose spread only tightens in time.
  try {
    bool all = true;
    std::string detail;
    int fx = 0;
    for (const GeneratorSpec& s : {brownian(1.0), stable_process(1.0, 1.0)}) {
      const GridOperator Gc = discretize(s, unit, 4e-3);
      const EigenPair pair = principal_eigenpair(Gc);
      double prev = std::numeric_limits<double>::infinity();
      bool ok = true;
      for (double t : {0.1, 0.5, 1.0}) {
        const IuRatio r = iu_ratio(Gc, pair, t);
        const double spread = r.c_upper / r.c_lower;
        ok = ok && r.c_lower > 0 && std::isfinite(r.c_upper) &&
             spread <= prev * (1.0 + 1e-9);
        prev = spread;
      }
      all = all && ok;
      detail += std::string(fx ? "stable" : "brownian") + " final spread " + fmt(prev) + "; ";
      ++fx;
    }
    record(12, all, "heat kernel sandwiched by the eigenfunction product", detail);
  } catch (const std::exception& e) {
    record_error(12, "heat kernel sandwiched by the eigenfunction product", e);
  }

  // 13. A deliberately flipped potential smuggled into the verification run
  //     must drive the real binary to exit code 2; the honest twin exits 0.
  try {
    const std::string cli = HOPFLAB_CLI_BIN;
    const std::string cfgs = HOPFLAB_CONFIG_DIR;
    auto run_cli = [&](const std::string& cfg, const std::string& leaf) {
      const std::string cmd = "\"" + cli + "\" --config \"" + cfgs + "/" + cfg + "\" --out \"" +
                              (tmp.path / leaf).string() + "\" > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    };
    const int planted = run_cli("brownian_interval_planted.json", "planted");
    const int honest = run_cli("brownian_interval_verify.json", "honest");
    record(13, planted == 2 && honest == 0, "planted violation trips the verifier exit code",
           "planted exit " + fmt(planted) + ", honest exit " + fmt(honest));
  } catch (const std::exception& e) {
    record_error(13, "planted violation trips the verifier exit code", e);
  }

  // 14. Scheduling must not leak into results: worker counts 1 and 8 produce
  //     byte-identical summaries for the same config.
  try {
    const std::string cfgs = HOPFLAB_CONFIG_DIR;
    RunConfig cfg = load_config(cfgs + "/brownian_interval_verify.json");
    auto run_with = [&](int workers, const char* leaf) {
      RunOverrides ov;
      ov.workers = workers;
      ov.out_dir = (tmp.path / leaf).string();
      return execute(cfg, ov);
    };
    const RunOutcome a = run_with(1, "w1");
    const RunOutcome b = run_with(8, "w8");
    const std::string sa = slurp(tmp.path / "w1" / "summary.json");
    const std::string sb = slurp(tmp.path / "w8" / "summary.json");
    const std::string ca = slurp(tmp.path / "w1" / "verify.csv");
    const std::string cb = slurp(tmp.path / "w8" / "verify.csv");
    record(14,
           a.status == RunStatus::Pass && b.status == RunStatus::Pass && !sa.empty() &&
               sa == sb && ca == cb,
           "summaries are byte-identical across 1 and 8 workers",
           "summary bytes " + fmt(double(sa.size())) + " vs " + fmt(double(sb.size())));
  } catch (const std::exception& e) {
    record_error(14, "summaries are byte-identical across 1 and 8 workers", e);
  }

  std::printf("%s: %d of 14 checks failed\n", g_failures ? "FAIL" : "OK", g_failures);
  return g_failures ? 1 : 0;
}
