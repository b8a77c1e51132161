#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "hopflab/common.hpp"
#include "hopflab/domain.hpp"
#include "hopflab/rng.hpp"

namespace hopflab {

/// Scalar coefficient field. Constants carry exact bounds; callable fields
/// may declare bounds, otherwise bounds are estimated by probing.
class ScalarField {
 public:
  ScalarField() : ScalarField(0.0) {}
  ScalarField(double v) : constant_(true), value_(v), lo_(v), hi_(v), has_bounds_(true) {}
  ScalarField(std::function<double(const Vec&)> fn, std::optional<double> lo = {},
              std::optional<double> hi = {})
      : constant_(false), fn_(std::move(fn)) {
    if (lo && hi) {
      lo_ = *lo;
      hi_ = *hi;
      has_bounds_ = true;
    }
  }

  double operator()(const Vec& x) const { return constant_ ? value_ : fn_(x); }
  bool is_constant() const { return constant_; }
  double constant_value() const { return value_; }
  bool has_declared_bounds() const { return has_bounds_; }
  double declared_lo() const { return lo_; }
  double declared_hi() const { return hi_; }

  /// Inf and sup over the domain. Exact for constants and declared bounds,
  /// otherwise estimated on a probe lattice over the bounding box.
  std::pair<double, double> bounds_over(const Domain& dom, int probes_per_dim = 64) const {
    if (has_bounds_) return {lo_, hi_};
    Vec lo(dom.dim()), hi(dom.dim());
    dom.bounding_box(lo, hi);
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    const int d = dom.dim();
    std::vector<int> idx(d, 0);
    const int n = probes_per_dim;
    while (true) {
      Vec x(d);
      for (int k = 0; k < d; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * (idx[k] + 0.5) / n;
      if (dom.contains(x)) {
        const double v = (*this)(x);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      int k = 0;
      while (k < d && ++idx[k] == n) idx[k++] = 0;
      if (k == d) break;
    }
    if (!std::isfinite(mn)) throw std::runtime_error("ScalarField: no probe hit the domain");
    return {mn, mx};
  }

 private:
  bool constant_ = true;
  double value_ = 0;
  std::function<double(const Vec&)> fn_;
  double lo_ = 0, hi_ = 0;
  bool has_bounds_ = false;
};

/// Drift coefficient b(x).
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(Vec v) : constant_(true), value_(v) {}
  explicit VectorField(std::function<Vec(const Vec&)> fn) : constant_(false), fn_(std::move(fn)) {}
  static VectorField zero(int d) { return VectorField(Vec::zero(d)); }

  Vec operator()(const Vec& x) const { return constant_ ? value_ : fn_(x); }
  bool is_constant() const { return constant_; }
  bool is_zero() const { return constant_ && norm2(value_) == 0.0; }
  const Vec& constant_value() const { return value_; }

 private:
  bool constant_ = true;
  Vec value_{0.0};
  std::function<Vec(const Vec&)> fn_;
};

/// Diffusion matrix Q(x), symmetric positive semidefinite.
class DiffusionField {
 public:
  DiffusionField() = default;

  /// Isotropic constant diffusion Q = q I.
  static DiffusionField isotropic(int d, double q) {
    if (q < 0) throw std::invalid_argument("DiffusionField: negative diffusion");
    DiffusionField f;
    f.kind_ = q == 0 ? Kind::Zero : Kind::Isotropic;
    f.dim_ = d;
    f.q_ = q;
    return f;
  }
  static DiffusionField zero(int d) { return isotropic(d, 0.0); }

  /// Constant symmetric matrix. Rejected unless positive semidefinite.
  static DiffusionField constant(const Eigen::MatrixXd& Q) {
    DiffusionField f;
    f.kind_ = Kind::Matrix;
    f.dim_ = static_cast<int>(Q.rows());
    f.Q_ = Q;
    if (!Q.isApprox(Q.transpose(), 1e-12))
      throw std::invalid_argument("DiffusionField: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
      throw std::invalid_argument("DiffusionField: matrix not positive semidefinite");
    Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
    f.sigma_ = es.eigenvectors() * clamped.cwiseSqrt().asDiagonal();
    f.lambda_min_ = clamped.minCoeff();
    f.lambda_max_ = clamped.maxCoeff();
    return f;
  }

  bool is_zero() const { return kind_ == Kind::Zero; }
  bool is_isotropic() const { return kind_ != Kind::Matrix; }
  int dim() const { return dim_; }
  double isotropic_value() const { return kind_ == Kind::Isotropic ? q_ : 0.0; }

  /// Quadratic form xi' Q xi.
  double quad(const Vec& xi) const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::Isotropic: return q_ * norm2(xi);
      case Kind::Matrix: {
        double s = 0;
        for (int i = 0; i < dim_; ++i)
          for (int j = 0; j < dim_; ++j) s += xi[i] * Q_(i, j) * xi[j];
        return s;
      }
    }
    return 0.0;
  }

  double entry(int i, int j) const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::Isotropic: return i == j ? q_ : 0.0;
      case Kind::Matrix: return Q_(i, j);
    }
    return 0.0;
  }

  double lambda_min() const { return kind_ == Kind::Matrix ? lambda_min_ : q_; }
  double lambda_max() const { return kind_ == Kind::Matrix ? lambda_max_ : q_; }

  /// Apply the matrix square root to a standard normal vector: returns
  /// sigma z with sigma sigma' = Q.
  Vec apply_sigma(const Vec& z) const {
    switch (kind_) {
      case Kind::Zero: return Vec::zero(z.d);
      case Kind::Isotropic: return std::sqrt(q_) * z;
      case Kind::Matrix: {
        Vec out(z.d);
        for (int i = 0; i < dim_; ++i) {
          double s = 0;
          for (int j = 0; j < dim_; ++j) s += sigma_(i, j) * z[j];
          out[i] = s;
        }
        return out;
      }
    }
    return z;
  }

 private:
  enum class Kind { Zero, Isotropic, Matrix } kind_ = Kind::Zero;
  int dim_ = 1;
  double q_ = 0.0;
  Eigen::MatrixXd Q_, sigma_;
  double lambda_min_ = 0.0, lambda_max_ = 0.0;
};

/// Mean of cos(t <e,u>) over unit directions u in R^d. Equals cos(t) in 1D
/// and a normalized Bessel function in higher dimension.
inline double mean_cos(int d, double t) {
  t = std::abs(t);
  if (d == 1) return std::cos(t);
  if (t < 1e-4) {
    const double t2 = t * t;
    return 1.0 - t2 / (2.0 * d) + t2 * t2 / (8.0 * d * (d + 2.0));
  }
  const double nu = 0.5 * d - 1.0;
  return std::tgamma(0.5 * d) * std::pow(2.0 / t, nu) * std::cyl_bessel_j(nu, t);
}

/// Distribution of a single jump, isotropic with bounded support.
class JumpDistribution {
 public:
  /// Uniform law on the closed ball of the given radius.
  static JumpDistribution uniform_ball(double radius) {
    if (!(radius > 0)) throw std::invalid_argument("JumpDistribution: radius must be positive");
    JumpDistribution j;
    j.kind_ = Kind::UniformBall;
    j.radius_ = radius;
    return j;
  }

  /// Radial density profile tabulated at increasing radii. The density of
  /// the jump in R^d is proportional to the interpolated profile f(|y|);
  /// normalization is computed from the table. Support ends at the last radius.
  static JumpDistribution tabulated_radial(std::vector<double> r, std::vector<double> f, int dim) {
    if (r.size() != f.size() || r.size() < 2)
      throw std::invalid_argument("JumpDistribution: bad table");
    for (size_t i = 0; i + 1 < r.size(); ++i)
      if (!(r[i] < r[i + 1])) throw std::invalid_argument("JumpDistribution: radii not increasing");
    for (double v : f)
      if (v < 0) throw std::invalid_argument("JumpDistribution: negative density");
    JumpDistribution j;
    j.kind_ = Kind::Tabulated;
    j.radius_ = r.back();
    j.dim_ = dim;
    // Refined radial cdf of |J|: pdf(rr) ~ f(rr) rr^{d-1}.
    const int cells = 2048;
    j.grid_r_.resize(cells + 1);
    j.grid_cdf_.resize(cells + 1);
    j.grid_f_.resize(cells + 1);
    const double r0 = r.front() > 0 ? 0.0 : 0.0;
    auto interp_f = [&](double rr) -> double {
      if (rr <= r.front()) return rr < r.front() ? 0.0 : f.front();
      if (rr >= r.back()) return f.back();
      auto it = std::upper_bound(r.begin(), r.end(), rr);
      const size_t k = static_cast<size_t>(it - r.begin());
      const double t = (rr - r[k - 1]) / (r[k] - r[k - 1]);
      return f[k - 1] + t * (f[k] - f[k - 1]);
    };
    double acc = 0;
    for (int i = 0; i <= cells; ++i) {
      const double rr = r0 + (j.radius_ - r0) * i / cells;
      j.grid_r_[i] = rr;
      j.grid_f_[i] = interp_f(rr);
      if (i > 0) {
        const double rm = 0.5 * (j.grid_r_[i] + j.grid_r_[i - 1]);
        const double w = (j.grid_r_[i] - j.grid_r_[i - 1]) * interp_f(rm) *
                         std::pow(rm, dim - 1);
        acc += w;
      }
      j.grid_cdf_[i] = acc;
    }
    if (!(acc > 0)) throw std::invalid_argument("JumpDistribution: zero total mass");
    for (auto& v : j.grid_cdf_) v /= acc;
    j.norm_ = acc * sphere_surface(dim);  // so point density = f(|y|)/norm_
    return j;
  }

  double support_radius() const { return radius_; }

  /// Density of the jump law at a point in R^d.
  double point_density(int d, const Vec& y) const {
    const double rr = norm(y);
    if (rr > radius_) return 0.0;
    if (kind_ == Kind::UniformBall) return 1.0 / (ball_volume(d) * std::pow(radius_, d));
    return interp_profile(rr) / norm_;
  }

  /// P(|J| >= R).
  double tail_prob(int d, double R) const {
    if (R <= 0) return 1.0;
    if (R >= radius_) return 0.0;
    if (kind_ == Kind::UniformBall) return 1.0 - std::pow(R / radius_, d);
    // Interpolate the refined cdf.
    auto it = std::upper_bound(grid_r_.begin(), grid_r_.end(), R);
    size_t k = static_cast<size_t>(it - grid_r_.begin());
    k = std::min(std::max<size_t>(k, 1), grid_r_.size() - 1);
    const double t = (R - grid_r_[k - 1]) / (grid_r_[k] - grid_r_[k - 1]);
    const double cdf = grid_cdf_[k - 1] + t * (grid_cdf_[k] - grid_cdf_[k - 1]);
    return 1.0 - cdf;
  }

  Vec sample(int d, Rng& rng) const {
    if (kind_ == Kind::UniformBall) return rng.uniform_in_ball(d, radius_);
    // Inverse-cdf draw of the radius, then an isotropic direction.
    const double u = rng.uniform();
    auto it = std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), u);
    size_t k = static_cast<size_t>(it - grid_cdf_.begin());
    k = std::min(std::max<size_t>(k, 1), grid_cdf_.size() - 1);
    const double c0 = grid_cdf_[k - 1], c1 = grid_cdf_[k];
    const double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    const double rr = grid_r_[k - 1] + t * (grid_r_[k] - grid_r_[k - 1]);
    if (d == 1) {
      Vec y(1);
      y[0] = rng.uniform() < 0.5 ? -rr : rr;
      return y;
    }
    Vec z = rng.gauss_vec(d);
    const double nz = std::max(norm(z), 1e-300);
    return (rr / nz) * z;
  }

  /// E[1 - cos(xi . J)] by radial quadrature; exact small-t handling via
  /// the direction-averaged cosine.
  double one_minus_cos_integral(int d, double xi_norm) const {
    if (xi_norm == 0) return 0.0;
    if (kind_ == Kind::UniformBall) {
      const double rad = radius_;
      auto f = [&](double rr) {
        return d * std::pow(rr, d - 1) / std::pow(rad, d) * (1.0 - mean_cos(d, xi_norm * rr));
      };
      return detail::adaptive_simpson(f, 0.0, rad, 1e-12);
    }
    double acc = 0;
    for (size_t i = 1; i < grid_r_.size(); ++i) {
      const double rm = 0.5 * (grid_r_[i] + grid_r_[i - 1]);
      acc += (grid_cdf_[i] - grid_cdf_[i - 1]) * (1.0 - mean_cos(d, xi_norm * rm));
    }
    return acc;
  }

  double second_moment(int d) const {
    if (kind_ == Kind::UniformBall) return radius_ * radius_ * d / (d + 2.0);
    double acc = 0;
    for (size_t i = 1; i < grid_r_.size(); ++i) {
      const double rm = 0.5 * (grid_r_[i] + grid_r_[i - 1]);
      acc += (grid_cdf_[i] - grid_cdf_[i - 1]) * rm * rm;
    }
    return acc;
  }

 private:
  double interp_profile(double rr) const {
    if (rr >= grid_r_.back()) return grid_f_.back();
    const double step = grid_r_[1] - grid_r_[0];
    const size_t k = std::min(grid_r_.size() - 2, static_cast<size_t>(rr / step));
    const double t = (rr - grid_r_[k]) / step;
    return grid_f_[k] + t * (grid_f_[k + 1] - grid_f_[k]);
  }

  enum class Kind { UniformBall, Tabulated } kind_ = Kind::UniformBall;
  int dim_ = 1;
  double radius_ = 1.0;
  double norm_ = 1.0;
  std::vector<double> grid_r_, grid_cdf_, grid_f_;
};

/// No jump part.
struct NoJumps {};

/// Rotation-invariant stable kernel of the given order in (0,2).
/// The density is scale * C(d, order) |y|^{-d-order} with the normalization
/// constant chosen so the symbol of the jump part is exactly scale*|xi|^order.
struct IsotropicStable {
  double order;
  double scale = 1.0;
};

/// Finite-activity jumps: rate(x) times a fixed jump distribution.
struct CompoundPoisson {
  ScalarField rate;
  JumpDistribution jump;
};

using LevyModel = std::variant<NoJumps, IsotropicStable, CompoundPoisson>;

/// Normalization constant of the rotation-invariant stable kernel:
/// with density C(d,s)|y|^{-d-s}, the jump symbol is |xi|^s.
inline double stable_normalization(int d, double s) {
  return std::pow(2.0, s) * std::tgamma(0.5 * (d + s)) /
         (std::pow(kPi, 0.5 * d) * std::exp(std::lgamma(-0.5 * s)));
}

/// Description of the operator
///   A u = 1/2 tr(Q D^2 u) + b . grad u
///         + int ( u(x+y) - u(x) - y.grad u(x) / (1+|y|^2) ) N(x, dy),
/// together with a killing rate c >= 0 and a forcing term g <= 0.
struct GeneratorSpec {
  int dim = 1;
  DiffusionField diffusion;
  VectorField drift = VectorField(Vec{0.0});
  LevyModel jumps = NoJumps{};
  ScalarField killing = ScalarField(0.0);
  ScalarField source = ScalarField(0.0);

  /// Validates structural hypotheses: psd diffusion (checked at
  /// construction of DiffusionField), kernel order in (0,2), nonnegative
  /// killing where bounds are known, bounded compound-Poisson rate.
  void validate() const {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("GeneratorSpec: bad dimension");
    if (const auto* st = std::get_if<IsotropicStable>(&jumps)) {
      if (!(st->order > 0.0) || !(st->order < 2.0))
        throw std::invalid_argument("GeneratorSpec: stable order must lie in (0,2)");
      if (!(st->scale > 0.0))
        throw std::invalid_argument("GeneratorSpec: stable scale must be positive");
    }
    if (const auto* cp = std::get_if<CompoundPoisson>(&jumps)) {
      if (!cp->rate.is_constant() && !cp->rate.has_declared_bounds())
        throw std::invalid_argument("GeneratorSpec: compound-Poisson rate needs declared bounds");
      if (cp->rate.has_declared_bounds() && cp->rate.declared_lo() < 0)
        throw std::invalid_argument("GeneratorSpec: negative jump rate");
    }
    if (killing.has_declared_bounds() && killing.declared_lo() < 0)
      throw std::invalid_argument("GeneratorSpec: killing rate must be nonnegative");
  }

  /// sup_x int min(1, |y|^2) N(x, dy); finite under the standing hypotheses.
  double jump_intensity_bound() const {
    if (std::holds_alternative<NoJumps>(jumps)) return 0.0;
    if (const auto* st = std::get_if<IsotropicStable>(&jumps)) {
      const double C = stable_normalization(dim, st->order);
      return st->scale * C * sphere_surface(dim) *
             (1.0 / (2.0 - st->order) + 1.0 / st->order);
    }
    const auto& cp = std::get<CompoundPoisson>(jumps);
    const double sup_rate = cp.rate.is_constant() ? cp.rate.constant_value()
                                                  : cp.rate.declared_hi();
    // int min(1,|y|^2) d(jump law) <= 1, refined by the second moment when
    // the support is small.
    const double m2 = cp.jump.second_moment(dim);
    return sup_rate * std::min(1.0, m2 < 1.0 ? m2 : 1.0);
  }
};

/// Fourier symbol p(x, xi) of the operator:
///   p = 1/2 xi.Q(x) xi - i b(x).xi
///       + int (1 - e^{i xi.y} + i xi.y/(1+|y|^2)) N(x, dy).
/// Real part is nonnegative; imaginary part vanishes for symmetric kernels
/// and zero drift.
inline std::complex<double> symbol(const GeneratorSpec& spec, const Vec& x, const Vec& xi) {
  double re = 0.5 * spec.diffusion.quad(xi);
  double im = -dot(spec.drift(x), xi);
  if (const auto* st = std::get_if<IsotropicStable>(&spec.jumps)) {
    re += st->scale * std::pow(norm(xi), st->order);
  } else if (const auto* cp = std::get_if<CompoundPoisson>(&spec.jumps)) {
    // Isotropic jump law: the sine and compensator terms cancel by symmetry.
    re += cp->rate(x) * cp->jump.one_minus_cos_integral(spec.dim, norm(xi));
  }
  return {re, im};
}

/// Support of single-jump displacements, uniform over starting points.
inline SupportDescriptor range_of_nonlocality(const GeneratorSpec& spec) {
  if (std::holds_alternative<NoJumps>(spec.jumps))
    return {SupportDescriptor::Kind::Empty, 0.0};
  if (std::holds_alternative<IsotropicStable>(spec.jumps))
    return {SupportDescriptor::Kind::AllSpace, 0.0};
  const auto& cp = std::get<CompoundPoisson>(spec.jumps);
  return {SupportDescriptor::Kind::Dilation, cp.jump.support_radius()};
}

enum class CertificateVerdict { Certified, Inconclusive };

struct SymbolCertificate {
  CertificateVerdict verdict = CertificateVerdict::Inconclusive;
  double integral = std::numeric_limits<double>::infinity();
  double radius = 0.0;
};

namespace detail {

/// Pointwise lower bound for Re p(z, xi) minimized over probe points,
/// as a function of |xi|. Each additive part is minimized separately,
/// which only lowers the bound and keeps the certificate conservative.
struct SymbolLowerBound {
  double half_lambda_min_q = 0;  // 1/2 lambda_min(Q)
  double stable_scale = 0;
  double stable_order = 1;
  double cp_rate_min = 0;
  const JumpDistribution* cp_jump = nullptr;
  int dim = 1;

  double operator()(double rho) const {
    double v = half_lambda_min_q * rho * rho;
    if (stable_scale > 0) v += stable_scale * std::pow(rho, stable_order);
    if (cp_jump && cp_rate_min > 0)
      v += cp_rate_min * cp_jump->one_minus_cos_integral(dim, rho);
    return v;
  }
};

inline SymbolLowerBound make_symbol_lower_bound(const GeneratorSpec& spec, const Domain& dom) {
  SymbolLowerBound lb;
  lb.dim = spec.dim;
  lb.half_lambda_min_q = 0.5 * spec.diffusion.lambda_min();
  if (const auto* st = std::get_if<IsotropicStable>(&spec.jumps)) {
    lb.stable_scale = st->scale;
    lb.stable_order = st->order;
  } else if (const auto* cp = std::get_if<CompoundPoisson>(&spec.jumps)) {
    lb.cp_jump = &cp->jump;
    lb.cp_rate_min = cp->rate.bounds_over(dom).first;
  }
  return lb;
}

}  // namespace detail

/// Attempts to certify int_{|xi| <= r} d xi / inf_z Re p(z, xi) < infinity
/// by dyadic shell integration toward xi = 0. Shells must decay
/// geometrically for certification; otherwise the test is inconclusive
/// (the integral may diverge, or the probe-based bound may be too weak).
inline SymbolCertificate exit_time_certificate_symbol(const GeneratorSpec& spec,
                                                      const Domain& dom, double r) {
  const auto lower = detail::make_symbol_lower_bound(spec, dom);
  const int d = spec.dim;
  const double area = sphere_surface(d);
  SymbolCertificate cert;
  cert.radius = r;

  double total = 0.0;
  double prev_shell = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  double hi = r;
  for (int level = 0; level < 400; ++level) {
    const double lo = 0.5 * hi;
    auto integrand = [&](double rho) {
      const double p = lower(rho);
      if (!(p > 0)) return std::numeric_limits<double>::infinity();
      return area * std::pow(rho, d - 1) / p;
    };
    const double shell = detail::adaptive_simpson(integrand, lo, hi, 1e-12, 24);
    if (!std::isfinite(shell)) return cert;  // zero symbol on a shell: inconclusive
    total += shell;
    if (shell >= 0.95 * prev_shell)
      ++stagnant;
    else
      stagnant = 0;
    if (stagnant >= 12) return cert;  // shells not decaying: likely divergent
    if (shell < 1e-13 * std::max(total, 1e-300) || lo < 1e-250) {
      cert.verdict = CertificateVerdict::Certified;
      cert.integral = total;
      return cert;
    }
    prev_shell = shell;
    hi = lo;
  }
  return cert;
}

struct JumpCertificate {
  bool holds = false;
  double inf_mass = 0.0;
  double radius_used = 0.0;  // the 3r threshold
};

/// Lower bound for inf_z N(z, {|y| >= 3r}) with r = diam(D). Positive mass
/// certifies exit through large jumps.
inline JumpCertificate exit_time_certificate_jump(const GeneratorSpec& spec, const Domain& dom) {
  const double r3 = 3.0 * dom.diameter();
  JumpCertificate cert;
  cert.radius_used = r3;
  if (std::holds_alternative<NoJumps>(spec.jumps)) return cert;
  if (const auto* st = std::get_if<IsotropicStable>(&spec.jumps)) {
    const double C = stable_normalization(spec.dim, st->order);
    cert.inf_mass = st->scale * C * sphere_surface(spec.dim) *
                    std::pow(r3, -st->order) / st->order;
    cert.holds = cert.inf_mass > 0;
    return cert;
  }
  const auto& cp = std::get<CompoundPoisson>(spec.jumps);
  const double rate_min = cp.rate.bounds_over(dom).first;
  cert.inf_mass = rate_min * cp.jump.tail_prob(spec.dim, r3);
  cert.holds = cert.inf_mass > 0;
  return cert;
}

/// Diagnostic ratio 2 r |xi| |Im p| / Re p over a probe grid. Small values
/// indicate drift is dominated by the symmetric part at scale r.
inline double symbol_drift_ratio(const GeneratorSpec& spec, const Domain& dom,
                                 const std::vector<Vec>& xs, const std::vector<Vec>& xis) {
  const double r = dom.diameter();
  double worst = 0.0;
  for (const Vec& x : xs)
    for (const Vec& xi : xis) {
      const auto p = symbol(spec, x, xi);
      if (p.real() <= 0) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, 2.0 * r * norm(xi) * std::abs(p.imag()) / p.real());
    }
  return worst;
}

}  // namespace hopflab
