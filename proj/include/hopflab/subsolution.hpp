#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hopflab/functional.hpp"
#include "hopflab/spectral.hpp"

namespace hopflab {

enum class Provenance { ResolventBuilt, DirichletBuilt, User };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ResolventBuilt: return "resolvent-built";
    case Provenance::DirichletBuilt: return "dirichlet-built";
    case Provenance::User: return "user";
  }
  return "?";
}

/// A candidate weak subsolution: evaluable on all of R^d (grid-interpolated
/// inside D, explicit exterior data outside), with its supremum over
/// D union extended boundary and the construction uncertainty it carries.
struct Subsolution {
  std::string name;
  std::function<double(const Vec&)> values;
  double sup_DS = 0;            // sup over D and the extended boundary
  double sup_D = 0;             // interior sup (grid/probe scan)
  double sup_boundary_plus = 0; // sup of u^+ over the extended boundary
  Provenance provenance = Provenance::User;
  double stderr_ = 0; // worst construction stderr (MC-built values)
  double bias = 0;    // construction bias bound

  double operator()(const Vec& x) const { return values(x); }
};

/// u = -R_alpha f with zero exterior data: the canonical subsolution family.
/// f must be nonnegative, bounded and not identically zero on the grid.
inline Subsolution make_resolvent_subsolution(const GridOperator& G,
                                              const std::function<double(const Vec&)>& f,
                                              double alpha) {
  const Eigen::VectorXd fv = G.eval(f);
  if (fv.minCoeff() < 0)
    throw std::invalid_argument("make_resolvent_subsolution: f must be nonnegative");
  if (fv.maxCoeff() == 0) {
    Subsolution u;
    u.name = "zero-potential";
    u.values = [](const Vec&) { return 0.0; };
    u.provenance = Provenance::ResolventBuilt;
    return u;
  }
  auto r = std::make_shared<Eigen::VectorXd>(grid_resolvent(G, alpha, fv));
  const Domain* dom = G.dom;
  Subsolution u;
  u.name = "resolvent-potential";
  const GridOperator* g = &G;
  u.values = [g, r, dom](const Vec& x) {
    return dom->contains(x) ? -g->interpolate(*r, x) : 0.0;
  };
  u.sup_DS = 0.0; // values are <= 0 inside and 0 outside, exactly
  u.sup_D = -r->minCoeff();
  u.sup_boundary_plus = 0.0;
  u.provenance = Provenance::ResolventBuilt;
  return u;
}

/// The deliberate violation fixture: u = +R_alpha f is a strict
/// supersolution whenever f >= 0 is nontrivial, and must be caught by the
/// verification suite.
inline Subsolution make_resolvent_supersolution(const GridOperator& G,
                                                const std::function<double(const Vec&)>& f,
                                                double alpha) {
  Subsolution u = make_resolvent_subsolution(G, f, alpha);
  auto neg = u.values;
  u.name = "resolvent-potential-flipped";
  u.values = [neg](const Vec& x) { return -neg(x); };
  u.sup_D = u.sup_DS = u.sup_boundary_plus = 0;
  // Recover the interior sup from the flipped sign.
  const Eigen::VectorXd vals = G.eval(u.values);
  u.sup_D = std::max(0.0, vals.maxCoeff());
  u.sup_DS = u.sup_D;
  u.provenance = Provenance::User;
  return u;
}

/// Exit-data solution u(x) = E_x[e_c(tau) data(X_tau)] + E_x int e_c g:
/// Monte Carlo values at interior probe points, linear interpolation in
/// between, the declared data outside. One dimension only; the exterior sup
/// is taken over the declared probe set plus the domain endpoints.
inline Subsolution make_dirichlet_solution(const GeneratorSpec& spec, const Domain& dom,
                                           const std::function<double(const Vec&)>& exterior_data,
                                           const ScalarField& c, const ScalarField& g,
                                           std::vector<double> probes,
                                           const std::vector<Vec>& exterior_probes,
                                           const PathConfig& cfg, std::int64_t n,
                                           const std::string& name = "dirichlet-solution") {
  if (spec.dim != 1)
    throw std::invalid_argument("make_dirichlet_solution: interpolation backend is 1-d");
  if (probes.empty()) throw std::invalid_argument("make_dirichlet_solution: no probes");
  const auto gb = g.bounds_over(dom, 256);
  if (gb.second > 1e-12)
    throw std::invalid_argument("make_dirichlet_solution: source must be nonpositive");
  GeneratorSpec run = spec;
  run.killing = c;
  std::sort(probes.begin(), probes.end());

  Vec lo(1), hi(1);
  dom.bounding_box(lo, hi);
  double data_sup = std::max(exterior_data(lo), exterior_data(hi));
  double data_abs = std::max(std::abs(exterior_data(lo)), std::abs(exterior_data(hi)));
  for (const Vec& y : exterior_probes) {
    data_sup = std::max(data_sup, exterior_data(y));
    data_abs = std::max(data_abs, std::abs(exterior_data(y)));
  }

  auto xs = std::make_shared<std::vector<double>>();
  auto ys = std::make_shared<std::vector<double>>();
  xs->push_back(lo[0]);
  ys->push_back(exterior_data(lo));
  Subsolution u;
  u.name = name;
  u.sup_D = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < probes.size(); ++k) {
    PathConfig pc = cfg;
    pc.seed = cfg.seed + k;
    const Estimate e = stopped_functional(
        run, dom, exterior_data, [&g](const Vec& y) { return g(y); },
        std::numeric_limits<double>::infinity(), Vec{probes[k]}, pc, n, data_abs, -gb.first);
    xs->push_back(probes[k]);
    ys->push_back(e.value);
    u.stderr_ = std::max(u.stderr_, e.stderr_);
    u.bias = std::max(u.bias, e.bias_bound);
    u.sup_D = std::max(u.sup_D, e.value);
  }
  xs->push_back(hi[0]);
  ys->push_back(exterior_data(hi));

  const Domain* dp = &dom;
  auto data = exterior_data;
  u.values = [xs, ys, dp, data](const Vec& x) {
    if (!dp->contains(x)) return data(x);
    const auto it = std::upper_bound(xs->begin(), xs->end(), x[0]);
    const size_t k = static_cast<size_t>(it - xs->begin());
    if (k == 0) return ys->front();
    if (k >= xs->size()) return ys->back();
    const double f = (x[0] - (*xs)[k - 1]) / ((*xs)[k] - (*xs)[k - 1]);
    return (1.0 - f) * (*ys)[k - 1] + f * (*ys)[k];
  };
  // Exact-from-provenance supremum: with g <= 0 the interior never exceeds
  // the exterior data, so the data sup is the sup over the whole extended set.
  u.sup_boundary_plus = std::max(0.0, data_sup);
  u.sup_DS = data_sup;
  u.provenance = Provenance::DirichletBuilt;
  return u;
}

/// The gauge as a solution object: interior values from the grid gauge,
/// exterior data identically one.
inline Subsolution make_gauge_solution(const GridOperator& G) {
  auto v = std::make_shared<Eigen::VectorXd>(grid_gauge(G));
  auto ones = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Ones(G.size()));
  const GridOperator* g = &G;
  const Domain* dom = G.dom;
  Subsolution u;
  u.name = "gauge";
  u.values = [g, v, ones, dom](const Vec& x) {
    if (!dom->contains(x)) return 1.0;
    // The gauge tends to 1 at the boundary of the last grid cell, not to 0:
    // interpolate against the exterior value there.
    const double inner = g->interpolate(*v, x);
    const double shape = g->interpolate(*ones, x);
    return inner + (1.0 - shape);
  };
  u.sup_D = 1.0;
  u.sup_boundary_plus = 1.0;
  u.sup_DS = 1.0;
  u.provenance = Provenance::DirichletBuilt;
  return u;
}

/// Scalar multiple a u of a constructed object (a >= 0 keeps sups exact).
inline Subsolution scale_subsolution(const Subsolution& base, double a,
                                     const std::string& name) {
  if (a < 0) throw std::invalid_argument("scale_subsolution: negative scale changes sups");
  Subsolution u = base;
  auto inner = base.values;
  u.name = name;
  u.values = [inner, a](const Vec& x) { return a * inner(x); };
  u.sup_DS = a * base.sup_DS;
  u.sup_D = a * base.sup_D;
  u.sup_boundary_plus = a * base.sup_boundary_plus;
  u.stderr_ = a * base.stderr_;
  u.bias = a * base.bias;
  return u;
}

/// Maximum-principle precheck: the interior sup never beats the positive
/// part of the exterior sup (up to grid/MC slack). A constructed object
/// failing this is misbuilt, not merely a poor subsolution.
inline bool wmp_precheck(const Subsolution& u, double tol = 1e-9) {
  return u.sup_D <= u.sup_boundary_plus + 3.0 * u.stderr_ + u.bias + tol;
}

/// One probe/time cell of the defining-inequality audit.
struct SubsolutionProbe {
  Vec x;
  double t = 0;
  double u_at_x = 0;
  double estimate = 0; // E_x[e_c(tau ^ t) u(X)] + source part
  double stderr_ = 0;
  double margin = 0;    // estimate - u(x); the inequality wants >= 0
  double tolerance = 0; // 3 sigma + construction error
  bool pass = false;
};

struct SubsolutionReport {
  std::vector<SubsolutionProbe> probes;
  double worst_margin = 0;
  bool pass = true;
  bool inconclusive = false; // nominal violation hidden inside the error band
};

/// Tests u(x) <= E_x[e_c(tau ^ t) u(X_{tau ^ t})] + E_x int_0^{tau ^ t} e_c g
/// at every probe and horizon, one-sided at 3 sigma plus bias bounds.
inline SubsolutionReport verify_weak_subsolution(const Subsolution& u, const GeneratorSpec& spec,
                                                 const Domain& dom, const std::vector<Vec>& probes,
                                                 const std::vector<double>& times,
                                                 const PathConfig& cfg, std::int64_t n,
                                                 double scheme_slack = 0.0) {
  SubsolutionReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  auto g = spec.source;
  std::uint64_t batch = 0;
  for (const Vec& x : probes) {
    for (double t : times) {
      PathConfig pc = cfg;
      pc.seed = cfg.seed + (batch++);
      const Estimate e = stopped_functional(
          spec, dom, u.values, [&](const Vec& y) { return g(y); }, t, x, pc, n);
      SubsolutionProbe pr;
      pr.x = x;
      pr.t = t;
      pr.u_at_x = u(x);
      pr.estimate = e.value;
      pr.stderr_ = e.stderr_;
      pr.margin = e.value - pr.u_at_x;
      pr.tolerance = 3.0 * e.stderr_ + e.bias_bound + u.bias + 3.0 * u.stderr_ + scheme_slack;
      pr.pass = pr.margin >= -pr.tolerance;
      rep.worst_margin = std::min(rep.worst_margin, pr.margin);
      if (!pr.pass) rep.pass = false;
      if (pr.margin < 0 && pr.pass) rep.inconclusive = true;
      rep.probes.push_back(pr);
    }
  }
  return rep;
}

}  // namespace hopflab
