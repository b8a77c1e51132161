#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hopflab/doob.hpp"
#include "hopflab/subsolution.hpp"

namespace hopflab {

namespace detail {

/// Deterministic report fingerprint from the run ingredients.
inline std::uint64_t report_hash(const std::string& bound, const std::string& solution,
                                 const std::vector<Vec>& probes, std::uint64_t seed) {
  std::string s = bound + "|" + solution + "|";
  char buf[32];
  for (const Vec& x : probes)
    for (int i = 0; i < x.d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", x[i]);
      s += buf;
    }
  std::snprintf(buf, sizeof buf, "#%llu", static_cast<unsigned long long>(seed));
  s += buf;
  return fnv1a64(s);
}

}  // namespace detail

/// One probe of a lower-bound check. The inequality under test is
/// lhs >= rhs, audited one-sided: pass iff margin >= -tolerance.
struct ProbeResult {
  Vec x;
  double lhs = 0, rhs = 0;
  double margin = 0;    // lhs - rhs
  double sigma = 0;     // statistical stderr entering the tolerance
  double tolerance = 0; // 3 sigma + bias bounds + scheme slack
  bool pass = false;
};

struct HopfReport {
  std::string bound;    // which lower bound was tested
  std::string solution; // name of the tested function
  std::vector<ProbeResult> probes;
  bool pass = true;
  bool inconclusive = false; // nominal violation hidden inside the error band
  double worst_margin = std::numeric_limits<double>::infinity();
  std::uint64_t inputs_hash = 0;

  void absorb(const ProbeResult& pr) {
    worst_margin = std::min(worst_margin, pr.margin);
    if (!pr.pass) pass = false;
    if (pr.margin < 0 && pr.pass) inconclusive = true;
    probes.push_back(pr);
  }
};

/// Maximum-principle audit: interior sup against the positive part of the
/// exterior sup.
inline HopfReport check_wmp(const Subsolution& u, double tol = 1e-9) {
  HopfReport rep;
  rep.bound = "maximum-principle";
  rep.solution = u.name;
  ProbeResult pr;
  pr.lhs = u.sup_boundary_plus;
  pr.rhs = u.sup_D;
  pr.margin = pr.lhs - pr.rhs;
  pr.sigma = u.stderr_;
  pr.tolerance = 3.0 * u.stderr_ + u.bias + tol;
  pr.pass = pr.margin >= -pr.tolerance;
  rep.absorb(pr);
  rep.inputs_hash = detail::report_hash(rep.bound, u.name, {}, 0);
  return rep;
}

/// Boundary-mass bound: sup_DS - u(x) >= sup_DS * w(x) with w = 1 - v the
/// gauge complement, estimated by Monte Carlo at each probe.
inline HopfReport check_gauge_hopf(const Subsolution& u, const GeneratorSpec& spec,
                                   const Domain& dom, const std::vector<Vec>& probes,
                                   const PathConfig& cfg, std::int64_t n,
                                   double scheme_slack = 0.0) {
  HopfReport rep;
  rep.bound = "boundary-mass";
  rep.solution = u.name;
  const double ubar = u.sup_DS;
  std::uint64_t k = 0;
  for (const Vec& x : probes) {
    PathConfig pc = cfg;
    pc.seed = cfg.seed + (k++);
    const GaugePair g = gauge(spec, dom, x, pc, n);
    ProbeResult pr;
    pr.x = x;
    pr.lhs = ubar - u(x);
    pr.rhs = ubar * g.w.value;
    pr.margin = pr.lhs - pr.rhs;
    pr.sigma = std::abs(ubar) * g.w.stderr_ + u.stderr_;
    pr.tolerance = 3.0 * pr.sigma + std::abs(ubar) * g.w.bias_bound + u.bias + scheme_slack;
    pr.pass = pr.margin >= -pr.tolerance;
    rep.absorb(pr);
  }
  rep.inputs_hash = detail::report_hash(rep.bound, u.name, probes, cfg.seed);
  return rep;
}

/// Eigenfunction bound: sup_DS - u(x) >= phi(x)/(2e ||phi||) *
/// (c_inf sup_DS/(lambda + c_inf) + ginf_minus/(lambda + c_sup)).
/// Deterministic given the grid pair; tolerance covers only the candidate's
/// own construction error plus the declared scheme slack.
inline HopfReport check_eigen_hopf(const Subsolution& u, const GridOperator& G,
                                   const EigenPair& pair, std::pair<double, double> c_bounds,
                                   std::pair<double, double> g_bounds,
                                   const std::vector<Vec>& probes, double scheme_slack = 0.0) {
  if (!pair.converged) throw std::runtime_error("check_eigen_hopf: eigen pair not converged");
  if (u.sup_DS < 0)
    throw std::invalid_argument("check_eigen_hopf: bound needs a nonnegative sup");
  HopfReport rep;
  rep.bound = "eigenfunction";
  rep.solution = u.name;
  const double c_inf = c_bounds.first, c_sup = c_bounds.second;
  const double g_inf_minus = std::max(0.0, -g_bounds.second);
  const double lam = pair.lambda;
  const double c_term = (lam + c_inf > 0) ? c_inf * u.sup_DS / (lam + c_inf) : 0.0;
  const double g_term = (lam + c_sup > 0) ? g_inf_minus / (lam + c_sup) : 0.0;
  const double front = 1.0 / (2.0 * std::exp(1.0) * pair.phi_sup);
  for (const Vec& x : probes) {
    ProbeResult pr;
    pr.x = x;
    pr.lhs = u.sup_DS - u(x);
    pr.rhs = G.interpolate(pair.phi, x) * front * (c_term + g_term);
    pr.margin = pr.lhs - pr.rhs;
    pr.sigma = u.stderr_;
    pr.tolerance = 3.0 * u.stderr_ + u.bias + scheme_slack;
    pr.pass = pr.margin >= -pr.tolerance;
    rep.absorb(pr);
  }
  rep.inputs_hash = detail::report_hash(rep.bound, u.name, probes, 0);
  return rep;
}

/// Kernel lower-bound version: sup_DS - u(x) >= psi(x) * (sup_DS int c v dnu
/// + int g^- dnu), with (psi, nu) a certificate for the killing-free
/// resolvent at alpha = sup_D c, and v the grid gauge of the killed
/// operator. The certificate and the grid must share node geometry.
inline HopfReport check_minorization_hopf(const Subsolution& u,
                                          const MinorizationCertificate& cert,
                                          const GridOperator& G, const ScalarField& g,
                                          const std::vector<Vec>& probes,
                                          double scheme_slack = 0.0) {
  if (!cert.ok) throw std::runtime_error("check_minorization_hopf: certificate invalid");
  if (cert.psi.size() != G.size())
    throw std::invalid_argument("check_minorization_hopf: certificate/grid mismatch");
  if (u.sup_DS < 0)
    throw std::invalid_argument("check_minorization_hopf: bound needs a nonnegative sup");
  const double c_sup = G.killing.size() ? G.killing.maxCoeff() : 0.0;
  if (std::abs(cert.alpha - c_sup) > 1e-12)
    throw std::invalid_argument("check_minorization_hopf: certificate not at alpha = sup c");
  HopfReport rep;
  rep.bound = "kernel-minorization";
  rep.solution = u.name;
  const Eigen::VectorXd v = grid_gauge(G);
  double cv_mass = 0, gminus_mass = 0;
  for (int j = 0; j < G.size(); ++j) {
    cv_mass += G.killing[j] * v[j] * cert.nu[j];
    gminus_mass += std::max(0.0, -g(G.nodes[static_cast<size_t>(j)])) * cert.nu[j];
  }
  const double weight = u.sup_DS * cv_mass + gminus_mass;
  for (const Vec& x : probes) {
    ProbeResult pr;
    pr.x = x;
    pr.lhs = u.sup_DS - u(x);
    pr.rhs = G.interpolate(cert.psi, x) * weight;
    pr.margin = pr.lhs - pr.rhs;
    pr.sigma = u.stderr_;
    pr.tolerance = 3.0 * u.stderr_ + u.bias + scheme_slack;
    pr.pass = pr.margin >= -pr.tolerance;
    rep.absorb(pr);
  }
  rep.inputs_hash = detail::report_hash(rep.bound, u.name, probes, 0);
  return rep;
}

/// One scaling function for a whole family: sup_DS - u(x) >= sup_DS psi(x)
/// with psi = 1 - v the grid gauge complement, tested member by member.
/// Requires integrated killing mass (the quantitative hypothesis).
struct FamilyReport {
  std::vector<HopfReport> members;
  bool pass = true;
  bool inconclusive = false;
  double worst_margin = std::numeric_limits<double>::infinity();
};

inline FamilyReport check_quantitative_hopf_family(const GridOperator& G,
                                                   const std::vector<Subsolution>& family,
                                                   const std::vector<Vec>& probes,
                                                   double scheme_slack = 0.0) {
  if (family.empty())
    throw std::invalid_argument("check_quantitative_hopf_family: empty family");
  const double killing_mass = G.killing.sum() * G.cell;
  if (!(killing_mass > 0))
    throw std::invalid_argument(
        "check_quantitative_hopf_family: killing has no mass, no single scaling exists");
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(G.size()) - grid_gauge(G);
  FamilyReport fam;
  for (const Subsolution& u : family) {
    HopfReport rep;
    rep.bound = "family-scaling";
    rep.solution = u.name;
    for (const Vec& x : probes) {
      ProbeResult pr;
      pr.x = x;
      pr.lhs = u.sup_DS - u(x);
      pr.rhs = u.sup_DS * G.interpolate(w, x);
      pr.margin = pr.lhs - pr.rhs;
      pr.sigma = u.stderr_;
      pr.tolerance = 3.0 * u.stderr_ + u.bias + scheme_slack;
      pr.pass = pr.margin >= -pr.tolerance;
      rep.absorb(pr);
    }
    rep.inputs_hash = detail::report_hash(rep.bound, u.name, probes, 0);
    fam.worst_margin = std::min(fam.worst_margin, rep.worst_margin);
    if (!rep.pass) fam.pass = false;
    if (rep.inconclusive) fam.inconclusive = true;
    fam.members.push_back(std::move(rep));
  }
  return fam;
}

/// Boundary increment ratios (u(x_hat) - u(x_hat - h n)) / h^exponent along
/// the inward normal, a proxy for the scaled one-sided derivative.
struct NormalDerivativeReport {
  std::vector<double> hs;
  std::vector<double> ratios;
  double liminf_proxy = 0;    // min over the small-h half
  double fitted_exponent = 0; // log-log slope of the raw increments
  bool ratios_diverging = false;
};

inline NormalDerivativeReport phi_normal_derivative(const Subsolution& u, const Domain& dom,
                                                    const Vec& x_hat, double exponent,
                                                    std::vector<double> hs,
                                                    double resolution = 0.0) {
  if (hs.size() < 4)
    throw std::invalid_argument("phi_normal_derivative: need at least four increments");
  std::sort(hs.begin(), hs.end(), std::greater<double>());
  if (hs.back() < resolution)
    throw std::invalid_argument("phi_normal_derivative: increment below stated resolution");
  if (std::abs(dom.signed_distance(x_hat)) > 1e-9)
    throw std::invalid_argument("phi_normal_derivative: anchor not on the boundary");
  const Vec n_in = -1.0 * dom.outward_normal(x_hat);
  const double u_hat = u(x_hat);

  NormalDerivativeReport rep;
  rep.hs = hs;
  std::vector<double> log_h, log_inc;
  for (double h : hs) {
    const double inc = u_hat - u(x_hat + h * n_in);
    rep.ratios.push_back(inc / std::pow(h, exponent));
    if (inc > 0) {
      log_h.push_back(std::log(h));
      log_inc.push_back(std::log(inc));
    }
  }
  const size_t tail = hs.size() / 2;
  rep.liminf_proxy = *std::min_element(rep.ratios.begin() + tail, rep.ratios.end());

  if (log_h.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < log_h.size(); ++i) {
      sx += log_h[i];
      sy += log_inc[i];
      sxx += log_h[i] * log_h[i];
      sxy += log_h[i] * log_inc[i];
    }
    const double nn = static_cast<double>(log_h.size());
    rep.fitted_exponent = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  }
  // Divergence diagnostic: the small-h half keeps growing and has already
  // left the large-h scale behind.
  bool growing = true;
  for (size_t i = tail; i + 1 < rep.ratios.size(); ++i)
    if (rep.ratios[i + 1] <= rep.ratios[i]) growing = false;
  rep.ratios_diverging = growing && rep.ratios.back() > 4.0 * rep.ratios.front();
  return rep;
}

}  // namespace hopflab
