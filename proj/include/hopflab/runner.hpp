#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hopflab/cache.hpp"
#include "hopflab/config.hpp"
#include "hopflab/doob.hpp"
#include "hopflab/functional.hpp"
#include "hopflab/report.hpp"
#include "hopflab/sampler.hpp"
#include "hopflab/spectral.hpp"
#include "hopflab/subsolution.hpp"
#include "hopflab/verify.hpp"

namespace hopflab {

/// Process exit codes: pass, usage/config error, violated bound, result
/// inside the error band.
enum class RunStatus : int { Pass = 0, Error = 1, Violation = 2, Inconclusive = 3 };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Pass: return "pass";
    case RunStatus::Error: return "error";
    case RunStatus::Violation: return "violation";
    case RunStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

inline PathConfig build_paths(const RunConfig& cfg) {
  PathConfig pc;
  pc.dt = cfg.numeric.dt;
  pc.t_max = cfg.numeric.t_max;
  pc.seed = cfg.numeric.seed;
  pc.workers = cfg.numeric.workers;
  return pc;
}

namespace detail {

inline Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = v[i];
  return x;
}

inline std::string vec_str(const Vec& x) {
  std::string s = "(";
  for (int i = 0; i < x.d; ++i) {
    if (i) s += ", ";
    s += format_g17(x[i]);
  }
  return s + ")";
}

inline nlohmann::ordered_json vec_json(const Vec& x) {
  auto a = nlohmann::ordered_json::array();
  for (int i = 0; i < x.d; ++i) a.push_back(x[i]);
  return a;
}

inline nlohmann::ordered_json estimate_json(const Estimate& e) {
  nlohmann::ordered_json j;
  j["value"] = e.value;
  j["stderr"] = e.stderr_;
  j["bias"] = e.bias_bound;
  j["n"] = e.n;
  return j;
}

inline std::vector<Vec> probe_list(const RunConfig& cfg, const Domain& dom) {
  std::vector<Vec> out;
  if (!cfg.numeric.probes.empty()) {
    for (const auto& p : cfg.numeric.probes) {
      Vec x = to_vec(p);
      if (!dom.contains(x))
        throw ConfigError("config: probe " + vec_str(x) + " is not inside the domain");
      out.push_back(x);
    }
    return out;
  }
  if (cfg.domain.shape == "interval") {
    const double lo = cfg.domain.lo[0], hi = cfg.domain.hi[0];
    for (double f : {0.25, 0.5, 0.75}) out.push_back(Vec{lo + f * (hi - lo)});
  } else if (cfg.domain.shape == "ball") {
    Vec c = to_vec(cfg.domain.center);
    out.push_back(c);
    Vec off = c;
    off[0] += 0.5 * cfg.domain.radius;
    out.push_back(off);
  } else {
    Vec a(cfg.op.dim), b(cfg.op.dim), mid(cfg.op.dim);
    for (int i = 0; i < cfg.op.dim; ++i) {
      const double lo = cfg.domain.lo[static_cast<size_t>(i)];
      const double hi = cfg.domain.hi[static_cast<size_t>(i)];
      a[i] = lo + 0.25 * (hi - lo);
      mid[i] = lo + 0.5 * (hi - lo);
      b[i] = lo + 0.75 * (hi - lo);
    }
    out.push_back(a);
    out.push_back(mid);
    out.push_back(b);
  }
  return out;
}

inline std::vector<double> times_or(const RunConfig& cfg, std::initializer_list<double> dflt) {
  if (!cfg.numeric.times.empty()) return cfg.numeric.times;
  return dflt;
}

/// Dense-grid guard: the spectral backend stores n x n matrices.
inline GridOperator make_grid(const GeneratorSpec& spec, const Domain& dom, double h) {
  Vec lo(dom.dim()), hi(dom.dim());
  dom.bounding_box(lo, hi);
  double cells = 1;
  for (int i = 0; i < dom.dim(); ++i) cells *= (hi[i] - lo[i]) / h;
  if (cells > 3000.0)
    throw ConfigError("config: numeric.h yields more than 3000 grid nodes; coarsen h");
  return discretize(spec, dom, h);
}

inline nlohmann::ordered_json hopf_report_json(const HopfReport& rep) {
  nlohmann::ordered_json j;
  j["bound"] = rep.bound;
  j["solution"] = rep.solution;
  j["pass"] = rep.pass;
  j["inconclusive"] = rep.inconclusive;
  j["worst_margin"] = rep.worst_margin;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& pr : rep.probes) {
    nlohmann::ordered_json p;
    p["x"] = vec_json(pr.x);
    p["lhs"] = pr.lhs;
    p["rhs"] = pr.rhs;
    p["margin"] = pr.margin;
    p["tolerance"] = pr.tolerance;
    p["pass"] = pr.pass;
    arr.push_back(p);
  }
  j["probes"] = arr;
  return j;
}

}  // namespace detail

struct TaskResult {
  nlohmann::ordered_json results;
  std::vector<CsvTable> tables;
  std::vector<std::string> lines;
  std::vector<std::string> violations; // human-readable, probe-level
  RunStatus status = RunStatus::Pass;

  void escalate(RunStatus s) {
    // Violation dominates Inconclusive dominates Pass.
    auto rank = [](RunStatus r) {
      switch (r) {
        case RunStatus::Violation: return 2;
        case RunStatus::Inconclusive: return 1;
        default: return 0;
      }
    };
    if (rank(s) > rank(status)) status = s;
  }
};

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

inline TaskResult run_symbol(const RunConfig& cfg, const GeneratorSpec& spec, const Domain& dom) {
  TaskResult r;
  const std::vector<Vec> probes = detail::probe_list(cfg, dom);
  const Vec x0 = probes[probes.size() / 2];
  std::vector<Vec> xis;
  if (!cfg.task.xi.empty()) {
    for (const auto& v : cfg.task.xi) {
      if (static_cast<int>(v.size()) != cfg.op.dim)
        throw ConfigError("config: task.xi entries must have dim coordinates");
      xis.push_back(detail::to_vec(v));
    }
  } else {
    for (double m : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      for (int axis = 0; axis < cfg.op.dim; ++axis) {
        Vec xi = Vec::zero(cfg.op.dim);
        xi[axis] = m;
        xis.push_back(xi);
      }
    }
  }
  CsvTable t;
  t.name = "symbol";
  for (int i = 0; i < cfg.op.dim; ++i) t.header.push_back("xi_" + std::to_string(i + 1));
  t.header.push_back("re");
  t.header.push_back("im");
  double re_min = std::numeric_limits<double>::infinity();
  for (const Vec& xi : xis) {
    const std::complex<double> s = symbol(spec, x0, xi);
    std::vector<double> row;
    for (int i = 0; i < cfg.op.dim; ++i) row.push_back(xi[i]);
    row.push_back(s.real());
    row.push_back(s.imag());
    t.rows.push_back(row);
    re_min = std::min(re_min, s.real());
  }
  r.tables.push_back(t);
  r.results["x"] = detail::vec_json(x0);
  r.results["points"] = xis.size();
  r.results["re_min"] = re_min;
  r.lines.push_back("symbol: " + std::to_string(xis.size()) + " frequencies at x = " +
                    detail::vec_str(x0) + ", min real part " + format_g17(re_min));
  if (re_min < -1e-12) {
    r.escalate(RunStatus::Violation);
    r.violations.push_back("symbol: negative real part " + format_g17(re_min) +
                           " (the symbol of a Markov generator has re >= 0)");
  }
  return r;
}

inline TaskResult run_simulate(const RunConfig& cfg, const GeneratorSpec& spec,
                               const Domain& dom) {
  TaskResult r;
  const Vec x0 = detail::probe_list(cfg, dom).front();
  const PathConfig pc = build_paths(cfg);
  const BatchSummary b = simulate_batch(spec, dom, x0, pc, cfg.numeric.n);
  r.results["x"] = detail::vec_json(x0);
  r.results["n"] = b.n;
  r.results["exit_time"] = detail::estimate_json(b.tau);
  r.results["survival_weight"] = detail::estimate_json(b.e_c);
  r.results["censored"] = b.censored;
  nlohmann::ordered_json ex;
  ex["boundary"] = b.exits_on_boundary;
  ex["exterior_range"] = b.exits_exterior_range;
  ex["outside_range"] = b.exits_outside_range;
  ex["by_jump"] = b.exits_by_jump;
  r.results["exits"] = ex;
  CsvTable t;
  t.name = "simulate";
  t.header = {"tau_mean", "tau_stderr", "survival_mean", "survival_stderr",
              "censored", "boundary", "exterior_range", "outside_range", "by_jump"};
  t.rows.push_back({b.tau.value, b.tau.stderr_, b.e_c.value, b.e_c.stderr_,
                    static_cast<double>(b.censored), static_cast<double>(b.exits_on_boundary),
                    static_cast<double>(b.exits_exterior_range),
                    static_cast<double>(b.exits_outside_range),
                    static_cast<double>(b.exits_by_jump)});
  r.tables.push_back(t);
  r.lines.push_back("simulate: mean exit time " + format_g17(b.tau.value) + " +/- " +
                    format_g17(b.tau.stderr_) + " from " + detail::vec_str(x0));
  if (b.exits_outside_range > 0) {
    r.escalate(RunStatus::Violation);
    r.violations.push_back("simulate: " + std::to_string(b.exits_outside_range) +
                           " exits landed outside the stated range of nonlocality");
  }
  return r;
}

inline TaskResult run_gauge(const RunConfig& cfg, const GeneratorSpec& spec, const Domain& dom) {
  TaskResult r;
  const PathConfig base = build_paths(cfg);
  const std::vector<Vec> probes = detail::probe_list(cfg, dom);
  CsvTable t;
  t.name = "gauge";
  for (int i = 0; i < cfg.op.dim; ++i) t.header.push_back("x_" + std::to_string(i + 1));
  for (const char* c : {"v", "v_stderr", "v_bias", "w", "w_stderr", "censored"})
    t.header.push_back(c);
  auto arr = nlohmann::ordered_json::array();
  std::uint64_t k = 0;
  for (const Vec& x : probes) {
    PathConfig pc = base;
    pc.seed = base.seed + k++;
    const GaugePair g = gauge(spec, dom, x, pc, cfg.numeric.n);
    nlohmann::ordered_json p;
    p["x"] = detail::vec_json(x);
    p["v"] = detail::estimate_json(g.v);
    p["w"] = detail::estimate_json(g.w);
    p["censored"] = g.censored;
    arr.push_back(p);
    std::vector<double> row;
    for (int i = 0; i < cfg.op.dim; ++i) row.push_back(x[i]);
    row.insert(row.end(), {g.v.value, g.v.stderr_, g.v.bias_bound, g.w.value, g.w.stderr_,
                           static_cast<double>(g.censored)});
    t.rows.push_back(row);
    r.lines.push_back("gauge: v" + detail::vec_str(x) + " = " + format_g17(g.v.value) +
                      " +/- " + format_g17(g.v.stderr_));
  }
  r.results["probes"] = arr;
  r.tables.push_back(t);
  return r;
}

inline TaskResult run_resolvent(const RunConfig& cfg, const GeneratorSpec& spec,
                                const Domain& dom) {
  TaskResult r;
  const double alpha = cfg.task.alpha;
  const PathConfig base = build_paths(cfg);
  const GridOperator G = detail::make_grid(spec, dom, cfg.numeric.h);
  const Eigen::VectorXd grid = grid_resolvent(G, alpha, Eigen::VectorXd::Ones(G.size()));
  const std::vector<Vec> probes = detail::probe_list(cfg, dom);
  auto one = [](const Vec&) { return 1.0; };

  CsvTable t;
  t.name = "resolvent";
  for (int i = 0; i < cfg.op.dim; ++i) t.header.push_back("x_" + std::to_string(i + 1));
  for (const char* c : {"mc", "mc_stderr", "mc_bias", "grid", "diff", "allowance"})
    t.header.push_back(c);
  auto arr = nlohmann::ordered_json::array();
  std::uint64_t k = 0;
  for (const Vec& x : probes) {
    PathConfig pc = base;
    pc.seed = base.seed + k++;
    const Estimate mc = resolvent_apply(spec, dom, one, alpha, x, pc, cfg.numeric.n, true);
    const double gv = G.interpolate(grid, x);
    const double diff = mc.value - gv;
    const double allowance = 3.0 * mc.stderr_ + mc.bias_bound + cfg.numeric.tolerance;
    const bool agree = std::abs(diff) <= allowance;
    nlohmann::ordered_json p;
    p["x"] = detail::vec_json(x);
    p["mc"] = detail::estimate_json(mc);
    p["grid"] = gv;
    p["diff"] = diff;
    p["allowance"] = allowance;
    p["agree"] = agree;
    arr.push_back(p);
    std::vector<double> row;
    for (int i = 0; i < cfg.op.dim; ++i) row.push_back(x[i]);
    row.insert(row.end(), {mc.value, mc.stderr_, mc.bias_bound, gv, diff, allowance});
    t.rows.push_back(row);
    if (!agree) {
      r.escalate(RunStatus::Inconclusive);
      r.violations.push_back("resolvent: probe " + detail::vec_str(x) +
                             " sampler/grid gap " + format_g17(diff) + " exceeds allowance " +
                             format_g17(allowance));
    }
    r.lines.push_back("resolvent: R" + format_g17(alpha) + "[1]" + detail::vec_str(x) +
                      " sampler " + format_g17(mc.value) + " grid " + format_g17(gv));
  }
  r.results["alpha"] = alpha;
  r.results["h"] = cfg.numeric.h;
  r.results["probes"] = arr;
  r.tables.push_back(t);
  return r;
}

inline TaskResult run_eigen(const RunConfig& cfg, const GeneratorSpec& spec, const Domain& dom,
                            const std::filesystem::path& out_dir) {
  TaskResult r;
  const GridOperator G = detail::make_grid(spec, dom, cfg.numeric.h);
  const json cc = canonical_config(cfg);
  const std::string key =
      eigen_cache_key(cc.at("operator").dump(), cc.at("domain").dump(), cfg.numeric.h);
  const auto dir = cache_dir(out_dir);
  std::string warning;
  const bool hit = fetch_eigenpair(dir, key, G.size(), &warning).has_value();
  const EigenPair pair = cached_eigenpair(G, dir, key, &warning);
  if (!warning.empty()) std::cerr << warning << "\n";

  r.results["h"] = cfg.numeric.h;
  r.results["nodes"] = G.size();
  r.results["lambda"] = pair.lambda;
  r.results["residual"] = pair.residual;
  r.results["gap"] = pair.gap;
  r.results["iterations"] = pair.iterations;
  r.results["converged"] = pair.converged;
  r.results["phi_sup"] = pair.phi_sup;
  // Cache disposition is scheduling detail, not part of the summary.
  CsvTable t;
  t.name = "eigenfunction";
  for (int i = 0; i < cfg.op.dim; ++i) t.header.push_back("x_" + std::to_string(i + 1));
  t.header.push_back("phi");
  t.header.push_back("phi_hat");
  for (int i = 0; i < G.size(); ++i) {
    std::vector<double> row;
    const Vec& x = G.nodes[static_cast<size_t>(i)];
    for (int d = 0; d < cfg.op.dim; ++d) row.push_back(x[d]);
    row.push_back(pair.phi[i]);
    row.push_back(pair.phi_hat[i]);
    t.rows.push_back(row);
  }
  r.tables.push_back(t);
  r.lines.push_back("eigen: lambda = " + format_g17(pair.lambda) + " on " +
                    std::to_string(G.size()) + " nodes (cache " + (hit ? "hit" : "miss") + ")");
  if (!pair.converged) {
    r.escalate(RunStatus::Inconclusive);
    r.violations.push_back("eigen: power iteration did not converge");
  }
  return r;
}

inline TaskResult run_qsd(const RunConfig& cfg, const GeneratorSpec& spec, const Domain& dom,
                          const std::filesystem::path& out_dir) {
  TaskResult r;
  const GridOperator G = detail::make_grid(spec, dom, cfg.numeric.h);
  const json cc = canonical_config(cfg);
  const std::string key =
      eigen_cache_key(cc.at("operator").dump(), cc.at("domain").dump(), cfg.numeric.h);
  std::string warning;
  const EigenPair pair = cached_eigenpair(G, cache_dir(out_dir), key, &warning);
  if (!warning.empty()) std::cerr << warning << "\n";
  if (!pair.converged) {
    r.escalate(RunStatus::Inconclusive);
    r.violations.push_back("qsd: eigen pair did not converge");
  }
  const std::vector<double> times = detail::times_or(cfg, {0.25, 0.5, 1.0, 2.0, 4.0});
  const QsdReport q = qsd(G, pair, times);
  const DoobChain chain = resolvent_chain(G, pair, cfg.task.alpha > 0 ? cfg.task.alpha : 1.0);
  const ErgodicityReport erg = tv_ergodicity(chain);

  r.results["h"] = cfg.numeric.h;
  r.results["lambda"] = pair.lambda;
  auto arr = nlohmann::ordered_json::array();
  CsvTable prof;
  prof.name = "qsd_profile";
  prof.header = {"t", "tv"};
  bool monotone = true;
  for (size_t i = 0; i < q.times.size(); ++i) {
    nlohmann::ordered_json p;
    p["t"] = q.times[i];
    p["tv"] = q.profile[i];
    arr.push_back(p);
    prof.rows.push_back({q.times[i], q.profile[i]});
    if (i > 0 && q.profile[i] > q.profile[i - 1] + 1e-12) monotone = false;
  }
  r.results["profile"] = arr;
  r.results["profile_monotone"] = monotone;
  nlohmann::ordered_json ej;
  ej["rho"] = erg.rho;
  ej["r2"] = erg.r2;
  ej["fitted"] = erg.fitted;
  ej["monotone"] = erg.monotone;
  r.results["ergodicity"] = ej;
  r.tables.push_back(prof);
  CsvTable pit;
  pit.name = "qsd_pi";
  for (int i = 0; i < cfg.op.dim; ++i) pit.header.push_back("x_" + std::to_string(i + 1));
  pit.header.push_back("mass");
  for (int i = 0; i < G.size(); ++i) {
    std::vector<double> row;
    const Vec& x = G.nodes[static_cast<size_t>(i)];
    for (int d = 0; d < cfg.op.dim; ++d) row.push_back(x[d]);
    row.push_back(q.pi[i]);
    pit.rows.push_back(row);
  }
  r.tables.push_back(pit);
  r.lines.push_back("qsd: conditional law vs pi, final tv " +
                    format_g17(q.profile.empty() ? 0.0 : q.profile.back()));
  r.lines.push_back("qsd: chain contraction rho = " + format_g17(erg.rho) + " (r2 " +
                    format_g17(erg.r2) + ")");
  if (!monotone) {
    r.escalate(RunStatus::Inconclusive);
    r.violations.push_back("qsd: tv profile is not nonincreasing");
  }
  if (!erg.pass()) {
    r.escalate(RunStatus::Inconclusive);
    r.violations.push_back("qsd: chain tv decay did not fit a geometric profile below 1");
  }
  return r;
}

inline TaskResult run_minorize(const RunConfig& cfg, const GeneratorSpec& spec,
                               const Domain& dom, const std::filesystem::path& out_dir) {
  TaskResult r;
  const GridOperator G = detail::make_grid(spec, dom, cfg.numeric.h);
  const double alpha = cfg.task.alpha > 0 ? cfg.task.alpha : 1.0;
  const MinorizationCertificate cert = minorization_certificate(G, alpha);
  const json cc = canonical_config(cfg);
  const std::string key =
      eigen_cache_key(cc.at("operator").dump(), cc.at("domain").dump(), cfg.numeric.h);
  std::string warning;
  const EigenPair pair = cached_eigenpair(G, cache_dir(out_dir), key, &warning);
  if (!warning.empty()) std::cerr << warning << "\n";
  const PhiMinorization pm = minorization_phi_check(cert, pair);
  const IrreducibilityMeasure mu = maximal_irreducibility_measure(G, alpha);

  r.results["alpha"] = alpha;
  r.results["h"] = cfg.numeric.h;
  r.results["certificate_ok"] = cert.ok;
  r.results["slack"] = cert.slack;
  r.results["nu_mass"] = cert.ok ? cert.nu.sum() : 0.0;
  r.results["psi_sup"] = cert.ok ? cert.psi.maxCoeff() : 0.0;
  r.results["phi_floor"] = pm.c_min;
  r.results["phi_floor_positive"] = pm.holds;
  r.results["irreducible"] = irreducibility_check(G);
  r.results["mu_min"] = mu.mu.minCoeff();
  r.results["mu_tail_bound"] = mu.tail_bound;
  r.lines.push_back(std::string("minorize: certificate ") + (cert.ok ? "ok" : "trivial") +
                    ", nu mass " + format_g17(cert.ok ? cert.nu.sum() : 0.0));
  if (!cert.ok) {
    r.escalate(RunStatus::Inconclusive);
    r.violations.push_back("minorize: no nontrivial split found at alpha " + format_g17(alpha));
  }
  return r;
}

/// Builds the test family for the configured operator: the gauge solution,
/// a scaled copy, and the negated zero-order potential (an exact solution
/// with unit negative source). The planted member is a sign-flipped
/// potential, a strict supersolution that every bound must reject.
inline TaskResult run_verify(const RunConfig& cfg, const GeneratorSpec& spec, const Domain& dom,
                             const std::filesystem::path& out_dir) {
  TaskResult r;
  const PathConfig pc = build_paths(cfg);
  const std::vector<Vec> probes = detail::probe_list(cfg, dom);
  const std::vector<double> times = detail::times_or(cfg, {0.1, 0.5});
  const double slack = cfg.numeric.tolerance;
  const GridOperator Gc = detail::make_grid(spec, dom, cfg.numeric.h);
  const double c_sup = spec.killing.bounds_over(dom).second;

  auto one = [](const Vec&) { return 1.0; };
  struct Member {
    Subsolution u;
    double g_const; // its source level, constant by construction
  };
  std::vector<Member> family;
  family.push_back({make_gauge_solution(Gc), 0.0});
  family.push_back({scale_subsolution(family[0].u, 0.5, "gauge-halved"), 0.0});
  family.push_back({make_resolvent_subsolution(Gc, one, 0.0), -1.0});
  if (cfg.task.plant_supersolution)
    family.push_back({make_resolvent_supersolution(Gc, one, 0.0), 0.0});

  auto reports = nlohmann::ordered_json::array();
  CsvTable t;
  t.name = "verify";
  t.header = {"bound", "solution", "x_1", "lhs", "rhs", "margin", "tolerance", "pass"};
  // CSV wants numeric columns; bound/solution are indices into the lists
  // echoed in the summary.
  std::vector<std::string> bound_names, solution_names;
  auto name_index = [](std::vector<std::string>& pool, const std::string& s) {
    for (size_t i = 0; i < pool.size(); ++i)
      if (pool[i] == s) return static_cast<double>(i);
    pool.push_back(s);
    return static_cast<double>(pool.size() - 1);
  };
  // Members built here carry construction guarantees (grid algebra supplies
  // the inequality), so a nominal negative inside the error band is the
  // expected sampling behavior of an equality, not indecision. Only
  // user-supplied functions escalate "within band" to an inconclusive run.
  auto absorb = [&](const HopfReport& rep, Provenance prov) {
    reports.push_back(detail::hopf_report_json(rep));
    for (const auto& pr : rep.probes)
      t.rows.push_back({name_index(bound_names, rep.bound),
                        name_index(solution_names, rep.solution), pr.x.d > 0 ? pr.x[0] : 0.0,
                        pr.lhs, pr.rhs, pr.margin, pr.tolerance, pr.pass ? 1.0 : 0.0});
    if (!rep.pass) {
      r.escalate(RunStatus::Violation);
      for (const auto& pr : rep.probes)
        if (!pr.pass)
          r.violations.push_back(rep.bound + ": solution '" + rep.solution + "' probe " +
                                 detail::vec_str(pr.x) + " margin " + format_g17(pr.margin) +
                                 " below -" + format_g17(pr.tolerance));
    } else if (rep.inconclusive && prov == Provenance::User) {
      r.escalate(RunStatus::Inconclusive);
    }
    r.lines.push_back("verify: " + rep.bound + " x " + rep.solution + " -> " +
                      (rep.pass ? (rep.inconclusive ? "pass (within band)" : "pass")
                                : "VIOLATION"));
  };

  // Boundary comparison first: it needs no sampling and already rejects the
  // planted member.
  for (const auto& m : family) absorb(check_wmp(m.u), m.u.provenance);

  // Eigenfunction lower bound, on the killing-free operator.
  GeneratorSpec spec0 = spec;
  spec0.killing = ScalarField(0.0);
  const GridOperator G0 = detail::make_grid(spec0, dom, cfg.numeric.h);
  const json cc = canonical_config(cfg);
  json op0 = cc.at("operator");
  op0["killing"] = 0.0;
  const std::string key0 = eigen_cache_key(op0.dump(), cc.at("domain").dump(), cfg.numeric.h);
  std::string warning;
  const EigenPair pair0 = cached_eigenpair(G0, cache_dir(out_dir), key0, &warning);
  if (!warning.empty()) std::cerr << warning << "\n";
  const auto c_bounds = spec.killing.bounds_over(dom);
  for (const auto& m : family)
    absorb(check_eigen_hopf(m.u, G0, pair0, c_bounds, {m.g_const, m.g_const}, probes, slack),
           m.u.provenance);

  const double killing_mass = Gc.killing.sum() * Gc.cell;
  if (killing_mass > 0) {
    // Family bound: one window function for every member.
    std::vector<Subsolution> us;
    for (const auto& m : family) us.push_back(m.u);
    const FamilyReport fam = check_quantitative_hopf_family(Gc, us, probes, slack);
    for (size_t i = 0; i < fam.members.size(); ++i)
      absorb(fam.members[i], family[i].u.provenance);

    // Kernel-split bound: the split lives on the killing-free resolvent at
    // the killing sup.
    const MinorizationCertificate cert = minorization_certificate(G0, c_sup);
    if (cert.ok)
      for (const auto& m : family)
        absorb(check_minorization_hopf(m.u, cert, Gc, ScalarField(m.g_const), probes, slack),
               m.u.provenance);
    else
      r.lines.push_back("verify: kernel split unavailable at alpha " + format_g17(c_sup) +
                        ", bound skipped");
    r.results["killing_mass"] = killing_mass;
  } else {
    r.lines.push_back("verify: operator has no killing mass, family bound skipped");
  }

  // Defining-inequality audit by simulation, every member against its own
  // source level.
  auto weak = nlohmann::ordered_json::array();
  for (const auto& m : family) {
    GeneratorSpec member_spec = spec;
    member_spec.source = ScalarField(m.g_const);
    const SubsolutionReport rep = verify_weak_subsolution(m.u, member_spec, dom, probes, times,
                                                          pc, cfg.numeric.n, slack);
    nlohmann::ordered_json j;
    j["solution"] = m.u.name;
    j["pass"] = rep.pass;
    j["inconclusive"] = rep.inconclusive;
    j["worst_margin"] = rep.worst_margin;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& pr : rep.probes) {
      nlohmann::ordered_json p;
      p["x"] = detail::vec_json(pr.x);
      p["t"] = pr.t;
      p["margin"] = pr.margin;
      p["tolerance"] = pr.tolerance;
      p["pass"] = pr.pass;
      arr.push_back(p);
      t.rows.push_back({name_index(bound_names, "stopped-inequality"),
                        name_index(solution_names, m.u.name), pr.x.d > 0 ? pr.x[0] : 0.0,
                        pr.estimate, pr.u_at_x, pr.margin, pr.tolerance, pr.pass ? 1.0 : 0.0});
      if (!pr.pass)
        r.violations.push_back("stopped-inequality: solution '" + m.u.name + "' probe " +
                               detail::vec_str(pr.x) + " t " + format_g17(pr.t) + " margin " +
                               format_g17(pr.margin) + " below -" + format_g17(pr.tolerance));
    }
    j["probes"] = arr;
    weak.push_back(j);
    if (!rep.pass) r.escalate(RunStatus::Violation);
    else if (rep.inconclusive && m.u.provenance == Provenance::User)
      r.escalate(RunStatus::Inconclusive);
    r.lines.push_back("verify: stopped-inequality x " + m.u.name + " -> " +
                      (rep.pass ? "pass" : "VIOLATION"));
  }

  r.results["h"] = cfg.numeric.h;
  auto fam_names = nlohmann::ordered_json::array();
  for (const auto& m : family) fam_names.push_back(m.u.name);
  r.results["family"] = fam_names;
  r.results["bound_names"] = bound_names;
  r.results["solution_names"] = solution_names;
  r.results["bounds"] = reports;
  r.results["stopped_inequality"] = weak;
  r.tables.push_back(t);
  return r;
}

inline TaskResult run_suite(const RunConfig& cfg, const GeneratorSpec& spec, const Domain& dom,
                            const std::filesystem::path& out_dir) {
  TaskResult r;
  struct Part {
    const char* name;
    TaskResult res;
  };
  std::vector<Part> parts;
  parts.push_back({"symbol", run_symbol(cfg, spec, dom)});
  parts.push_back({"simulate", run_simulate(cfg, spec, dom)});
  parts.push_back({"gauge", run_gauge(cfg, spec, dom)});
  parts.push_back({"resolvent", run_resolvent(cfg, spec, dom)});
  parts.push_back({"eigen", run_eigen(cfg, spec, dom, out_dir)});
  // numeric.times means stopped-inequality horizons for the verify part;
  // the conditional-law profile keeps its own ladder.
  RunConfig cfg_qsd = cfg;
  cfg_qsd.numeric.times.clear();
  parts.push_back({"qsd", run_qsd(cfg_qsd, spec, dom, out_dir)});
  parts.push_back({"minorize", run_minorize(cfg, spec, dom, out_dir)});
  parts.push_back({"verify", run_verify(cfg, spec, dom, out_dir)});
  for (auto& p : parts) {
    r.results[p.name] = p.res.results;
    for (auto& tbl : p.res.tables) r.tables.push_back(std::move(tbl));
    for (auto& ln : p.res.lines) r.lines.push_back(std::move(ln));
    for (auto& v : p.res.violations) r.violations.push_back(std::move(v));
    r.escalate(p.res.status);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Entry point used by the command line tool and the acceptance harness.
// ---------------------------------------------------------------------------

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  std::optional<std::string> format; // json | csv | both
};

struct RunOutcome {
  RunStatus status = RunStatus::Pass;
  std::filesystem::path out_dir;
  std::vector<std::string> lines;
  std::vector<std::string> violations;
};

inline RunOutcome execute(RunConfig cfg, const RunOverrides& ov = {}) {
  if (ov.seed) cfg.numeric.seed = *ov.seed;
  if (ov.workers) cfg.numeric.workers = *ov.workers;
  if (ov.out_dir) cfg.output.directory = *ov.out_dir;
  if (ov.format) {
    if (*ov.format == "json") {
      cfg.output.json_format = true;
      cfg.output.csv_format = false;
    } else if (*ov.format == "csv") {
      cfg.output.json_format = false;
      cfg.output.csv_format = true;
    } else if (*ov.format == "both") {
      cfg.output.json_format = cfg.output.csv_format = true;
    } else {
      throw ConfigError("format must be json, csv or both");
    }
  }
  if (cfg.numeric.workers < 1) throw ConfigError("workers must be >= 1");

  const GeneratorSpec spec = build_spec(cfg);
  const Domain dom = build_domain(cfg);
  const std::filesystem::path out_dir = cfg.output.directory;

  TaskResult res;
  if (cfg.task.name == "symbol") res = run_symbol(cfg, spec, dom);
  else if (cfg.task.name == "simulate") res = run_simulate(cfg, spec, dom);
  else if (cfg.task.name == "gauge") res = run_gauge(cfg, spec, dom);
  else if (cfg.task.name == "resolvent") res = run_resolvent(cfg, spec, dom);
  else if (cfg.task.name == "eigen") res = run_eigen(cfg, spec, dom, out_dir);
  else if (cfg.task.name == "qsd") res = run_qsd(cfg, spec, dom, out_dir);
  else if (cfg.task.name == "minorize") res = run_minorize(cfg, spec, dom, out_dir);
  else if (cfg.task.name == "verify") res = run_verify(cfg, spec, dom, out_dir);
  else res = run_suite(cfg, spec, dom, out_dir);

  nlohmann::ordered_json summary;
  summary["tool"] = "hopflab";
  summary["task"] = cfg.task.name;
  summary["status"] = to_string(res.status);
  summary["violations"] = res.violations;
  summary["config"] = canonical_config(cfg);
  summary["results"] = res.results;

  RunArtifacts art;
  art.summary = std::move(summary);
  art.tables = std::move(res.tables);
  art.report_lines = res.lines;
  art.report_lines.push_back("status: " + std::string(to_string(res.status)));
  for (const auto& v : res.violations) art.report_lines.push_back("violated: " + v);
  write_artifacts(out_dir, art, cfg.output.json_format, cfg.output.csv_format,
                  cfg.numeric.workers);

  RunOutcome out;
  out.status = res.status;
  out.out_dir = out_dir;
  out.lines = std::move(art.report_lines);
  out.violations = std::move(res.violations);
  return out;
}

}  // namespace hopflab
