#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "hopflab/generator.hpp"

namespace hopflab {

/// Uniform-lattice restriction of the generator to the interior of D with
/// null exterior condition (u = 0 off D). Reference measure is Lebesgue on
/// D, carried by the node weight cell = h^d. Dimension <= 2.
struct GridOperator {
  const Domain* dom = nullptr;
  int d = 1;
  int n1 = 0, n2 = 1;      // interior lattice counts per axis
  double h1 = 0, h2 = 0;   // spacing per axis
  double lo1 = 0, lo2 = 0; // bounding-box lower corner (lattice anchor)
  double cell = 0;         // node weight h^d
  std::vector<Vec> nodes;
  std::vector<int> node_of_lattice; // n1*n2 entries, -1 when off the domain
  Eigen::MatrixXd L;                // full generator, killing included
  Eigen::VectorXd killing;          // c at nodes

  int size() const { return static_cast<int>(nodes.size()); }

  /// Node index of interior lattice position (i, j), -1 when absent.
  int lattice_node(int i, int j) const {
    if (i < 0 || i >= n1 || j < 0 || j >= n2) return -1;
    return node_of_lattice[static_cast<size_t>(i) * n2 + j];
  }

  Eigen::VectorXd eval(const std::function<double(const Vec&)>& f) const {
    Eigen::VectorXd v(size());
    for (int i = 0; i < size(); ++i) v[i] = f(nodes[static_cast<size_t>(i)]);
    return v;
  }

  /// Multilinear interpolation of a node vector, zero at any lattice corner
  /// that is not an interior node. In particular the value decays linearly
  /// to zero across the last cell before the boundary.
  double interpolate(const Eigen::VectorXd& v, const Vec& x) const {
    const double u1 = (x[0] - lo1) / h1 - 1.0;
    const int i0 = static_cast<int>(std::floor(u1));
    const double f1 = u1 - i0;
    auto at = [&](int i, int j) {
      const int k = lattice_node(i, j);
      return k < 0 ? 0.0 : v[k];
    };
    if (d == 1) return (1.0 - f1) * at(i0, 0) + f1 * at(i0 + 1, 0);
    const double u2 = (x[1] - lo2) / h2 - 1.0;
    const int j0 = static_cast<int>(std::floor(u2));
    const double f2 = u2 - j0;
    return (1.0 - f1) * ((1.0 - f2) * at(i0, j0) + f2 * at(i0, j0 + 1)) +
           f1 * ((1.0 - f2) * at(i0 + 1, j0) + f2 * at(i0 + 1, j0 + 1));
  }
};

namespace detail {

/// Mass of a radial measure outside the centered square of half-width a:
/// an exact angular decomposition over the ring a < |y| <= a*sqrt(2) plus
/// the caller-supplied analytic tail beyond the circumscribed circle.
inline double outside_square_mass(double a, const std::function<double(double)>& radial_density,
                                  const std::function<double(double)>& tail_beyond_radius) {
  auto ring = [&](double r) { return std::acos(std::min(1.0, a / r)) * radial_density(r) * r; };
  const double b = a * std::sqrt(2.0);
  return 8.0 * adaptive_simpson(ring, a, b, 1e-13, 32) + tail_beyond_radius(b);
}

}  // namespace detail

/// Assemble the grid generator: central differences for the diffusion,
/// upwind differences for the drift, singular-integral quadrature for the
/// jump part (second-order Taylor compensation within |y| <= h, exact or
/// subcell cell masses beyond, analytic tail for the far exterior), and the
/// killing rate on the diagonal. Off-diagonal jump entries are nonnegative
/// and every removed-mass term lands on the diagonal, so row sums stay <= 0
/// by construction when c = 0.
inline GridOperator discretize(const GeneratorSpec& spec, const Domain& dom, double h,
                               int min_nodes_per_dim = 50) {
  spec.validate();
  if (spec.dim > 2) throw std::invalid_argument("discretize: grid supports d <= 2 only");
  if (!(h > 0)) throw std::invalid_argument("discretize: h must be positive");
  const int d = spec.dim;

  GridOperator G;
  G.dom = &dom;
  G.d = d;
  Vec lo(d), hi(d);
  dom.bounding_box(lo, hi);
  G.lo1 = lo[0];
  const double w1 = hi[0] - lo[0];
  G.n1 = std::max(1, static_cast<int>(std::lround(w1 / h)) - 1);
  G.h1 = w1 / (G.n1 + 1);
  if (d == 2) {
    G.lo2 = lo[1];
    const double w2 = hi[1] - lo[1];
    G.n2 = std::max(1, static_cast<int>(std::lround(w2 / h)) - 1);
    G.h2 = w2 / (G.n2 + 1);
  }
  if (std::min(G.n1, d == 2 ? G.n2 : G.n1) < min_nodes_per_dim)
    throw std::invalid_argument("discretize: h too coarse for the domain");
  const bool has_jumps = !std::holds_alternative<NoJumps>(spec.jumps);
  if (d == 2 && has_jumps && std::abs(G.h1 - G.h2) > 1e-12 * G.h1)
    throw std::invalid_argument(
        "discretize: nonlocal quadrature needs equal spacing on both axes");
  G.cell = d == 1 ? G.h1 : G.h1 * G.h2;

  // Interior nodes, in lattice order.
  G.node_of_lattice.assign(static_cast<size_t>(G.n1) * G.n2, -1);
  for (int i = 0; i < G.n1; ++i)
    for (int j = 0; j < G.n2; ++j) {
      Vec x(d);
      x[0] = G.lo1 + (i + 1) * G.h1;
      if (d == 2) x[1] = G.lo2 + (j + 1) * G.h2;
      if (dom.contains(x)) {
        G.node_of_lattice[static_cast<size_t>(i) * G.n2 + j] = static_cast<int>(G.nodes.size());
        G.nodes.push_back(x);
      }
    }
  const int n = G.size();
  if (n == 0) throw std::invalid_argument("discretize: no interior nodes");
  G.L = Eigen::MatrixXd::Zero(n, n);
  G.killing = G.eval([&](const Vec& x) { return spec.killing(x); });

  // Lattice coordinates per node for neighbor lookups.
  std::vector<std::pair<int, int>> coords(static_cast<size_t>(n));
  for (int i = 0; i < G.n1; ++i)
    for (int j = 0; j < G.n2; ++j) {
      const int k = G.node_of_lattice[static_cast<size_t>(i) * G.n2 + j];
      if (k >= 0) coords[static_cast<size_t>(k)] = {i, j};
    }

  const double hs[2] = {G.h1, G.h2};
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l)
      if (k != l && spec.diffusion.entry(k, l) != 0.0)
        throw std::invalid_argument("discretize: non-diagonal diffusion unsupported on grid");

  for (int row = 0; row < n; ++row) {
    const auto [ci, cj] = coords[static_cast<size_t>(row)];
    const Vec& x = G.nodes[static_cast<size_t>(row)];
    // Couple toward a lattice offset; mass leaving the interior (an absorbed
    // target) stays on the diagonal only.
    auto add = [&](int di, int dj, double w) {
      const int tgt = G.lattice_node(ci + di, cj + dj);
      G.L(row, row) -= w;
      if (tgt >= 0) G.L(row, tgt) += w;
    };

    for (int axis = 0; axis < d; ++axis) {
      const double q = spec.diffusion.entry(axis, axis);
      if (q > 0) {
        const double w = 0.5 * q / sqr(hs[axis]);
        add(axis == 0 ? 1 : 0, axis == 0 ? 0 : 1, w);
        add(axis == 0 ? -1 : 0, axis == 0 ? 0 : -1, w);
      }
      const double b = spec.drift(x)[axis];
      if (b != 0.0) {
        const int sgn = b > 0 ? 1 : -1;
        add(axis == 0 ? sgn : 0, axis == 0 ? 0 : sgn, std::abs(b) / hs[axis]);
      }
    }

    if (const auto* st = std::get_if<IsotropicStable>(&spec.jumps)) {
      const double s = st->order, k = st->scale;
      const double C = k * stable_normalization(d, s);
      const double hh = hs[0];
      // Compensated small jumps |y| <= h act as an isotropic diffusion with
      // variance sigma2 = int_{|y|<=h} |y|^2 N(dy), split evenly per axis.
      const double sigma2 = C * sphere_surface(d) * std::pow(hh, 2.0 - s) / (2.0 - s);
      const double wdiag = sigma2 / (2.0 * d * sqr(hh));
      for (int axis = 0; axis < d; ++axis) {
        add(axis == 0 ? 1 : 0, axis == 0 ? 0 : 1, wdiag);
        add(axis == 0 ? -1 : 0, axis == 0 ? 0 : -1, wdiag);
      }
      if (d == 1) {
        // Exact power-law cell masses: cell m covers ((m-1/2)h, (m+1/2)h]
        // except the first, which starts at h where the compensation ends.
        const int M = G.n1;
        for (int m = 1; m <= M; ++m) {
          const double a = m == 1 ? hh : (m - 0.5) * hh;
          const double b = (m + 0.5) * hh;
          const double w = C * (std::pow(a, -s) - std::pow(b, -s)) / s;
          add(m, 0, w);
          add(-m, 0, w);
        }
        const double edge = (M + 0.5) * hh;
        G.L(row, row) -= 2.0 * C * std::pow(edge, -s) / s;
      } else {
        auto dens = [&](double r) { return C * std::pow(r, -2.0 - s); };
        const int M = static_cast<int>(std::ceil(dom.diameter() / hh)) + 1;
        for (int mi = -M; mi <= M; ++mi)
          for (int mj = -M; mj <= M; ++mj) {
            if (mi == 0 && mj == 0) continue;
            double w = 0;
            if (std::max(std::abs(mi), std::abs(mj)) <= 2) {
              // Near cells overlap the compensated ball: subcell midpoints
              // with the |y| > h indicator.
              const int sub = 8;
              const double dh = hh / sub;
              for (int a = 0; a < sub; ++a)
                for (int b = 0; b < sub; ++b) {
                  const double y1 = mi * hh - 0.5 * hh + (a + 0.5) * dh;
                  const double y2 = mj * hh - 0.5 * hh + (b + 0.5) * dh;
                  const double r = std::hypot(y1, y2);
                  if (r > hh) w += dens(r) * dh * dh;
                }
            } else {
              w = dens(std::hypot(mi * hh, mj * hh)) * hh * hh;
            }
            add(mi, mj, w);
          }
        const double a = (M + 0.5) * hh;
        G.L(row, row) -= detail::outside_square_mass(a, dens, [&](double R) {
          return C * sphere_surface(2) * std::pow(R, -s) / s;
        });
      }
    } else if (const auto* cp = std::get_if<CompoundPoisson>(&spec.jumps)) {
      const double rate = cp->rate(x);
      const double hh = hs[0];
      const double R0 = cp->jump.support_radius();
      const int M = static_cast<int>(std::ceil(R0 / hh)) + 1;
      if (d == 1) {
        // Exact cell masses from the radial cdf; the center cell (a jump
        // that stays within the node) is a no-op.
        for (int m = 1; m <= M; ++m) {
          const double a = (m - 0.5) * hh, b = (m + 0.5) * hh;
          const double w = 0.5 * rate * (cp->jump.tail_prob(1, a) - cp->jump.tail_prob(1, b));
          if (w > 0) {
            add(m, 0, w);
            add(-m, 0, w);
          }
        }
        G.L(row, row) -= rate * cp->jump.tail_prob(1, (M + 0.5) * hh);
      } else {
        auto dens = [&](double r) { return rate * cp->jump.point_density(2, Vec{r, 0.0}); };
        for (int mi = -M; mi <= M; ++mi)
          for (int mj = -M; mj <= M; ++mj) {
            if (mi == 0 && mj == 0) continue;
            const double w = dens(std::hypot(mi * hh, mj * hh)) * hh * hh;
            if (w > 0) add(mi, mj, w);
          }
        const double a = (M + 0.5) * hh;
        G.L(row, row) -= detail::outside_square_mass(
            a, dens, [&](double R) { return rate * cp->jump.tail_prob(2, R); });
      }
    }

    G.L(row, row) -= G.killing[row];
  }
  return G;
}

/// Principal eigenpair of the absorbed generator: lambda > 0 with
/// L phi = -lambda phi, left vector phi_hat, both strictly positive and
/// normalized to unit mass against the node measure.
struct EigenPair {
  double lambda = 0;
  Eigen::VectorXd phi, phi_hat;
  bool converged = false;
  int iterations = 0;
  double residual = 0;   // ||L phi + lambda phi||_inf / ||phi||_inf
  double gap = 0;        // lambda_2 - lambda, 0 when the second mode did not settle
  double phi_sup = 0;    // ||phi||_inf after normalization
  double phi_phihat = 0; // int phi phi_hat dm
};

inline EigenPair principal_eigenpair(const GridOperator& G, double tol = 1e-10,
                                     int max_iter = 2000) {
  const int n = G.size();
  const double shift = 1.0;
  const Eigen::MatrixXd A = shift * Eigen::MatrixXd::Identity(n, n) - G.L;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::PartialPivLU<Eigen::MatrixXd> luT(A.transpose());

  EigenPair out;
  // Successive eigenvalue estimates must settle below tol AND the residual
  // must reach 1e-8 relative sup-norm; the second condition matters when the
  // spectral separation is weak and the vector lags the value.
  auto iterate = [&](const Eigen::PartialPivLU<Eigen::MatrixXd>& fact, const Eigen::MatrixXd& M,
                     Eigen::VectorXd v, double& eig, bool& ok, int& iters) {
    double prev = std::numeric_limits<double>::infinity();
    double est = 0;
    v.normalize();
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd w = fact.solve(v);
      const double nw = w.norm();
      est = 1.0 / nw; // eigenvalue of A nearest zero is shift + lambda
      v = w / nw;
      ++iters;
      if (std::abs(est - prev) <= tol * std::abs(est)) {
        const double res =
            (M * v - est * v).lpNorm<Eigen::Infinity>() / v.lpNorm<Eigen::Infinity>();
        if (res <= 1e-8) {
          ok = true;
          break;
        }
      }
      prev = est;
    }
    eig = est;
    if (v.sum() < 0) v = -v;
    return v;
  };

  int iters = 0;
  bool ok_r = false, ok_l = false;
  double mu_r = 0, mu_l = 0;
  Eigen::VectorXd phi = iterate(lu, A, Eigen::VectorXd::Ones(n), mu_r, ok_r, iters);
  Eigen::VectorXd phi_hat =
      iterate(luT, A.transpose(), Eigen::VectorXd::Ones(n), mu_l, ok_l, iters);
  out.iterations = iters;
  out.converged = ok_r && ok_l;
  out.lambda = mu_r - shift;

  if (phi.minCoeff() <= 0 || phi_hat.minCoeff() <= 0)
    throw std::runtime_error("principal_eigenpair: eigenvector not strictly positive");

  // Normalize to unit mass against m.
  phi /= phi.sum() * G.cell;
  phi_hat /= phi_hat.sum() * G.cell;
  out.phi = phi;
  out.phi_hat = phi_hat;
  out.phi_sup = phi.maxCoeff();
  out.phi_phihat = phi.dot(phi_hat) * G.cell;
  out.residual = (G.L * phi + out.lambda * phi).lpNorm<Eigen::Infinity>() /
                 phi.lpNorm<Eigen::Infinity>();

  // Second mode by deflated inverse iteration; informative only. The start
  // vector must overlap every mode, so break any grid symmetry with a fixed
  // oscillating profile rather than a constant.
  {
    const double proj = phi_hat.dot(phi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 + std::sin(1.0 + 2.4 * i);
    v -= phi * (phi_hat.dot(v) / proj);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 300 && v.norm() > 0; ++it) {
      Eigen::VectorXd w = lu.solve(v);
      w -= phi * (phi_hat.dot(w) / proj);
      const double nw = w.norm();
      if (nw == 0) break;
      const double est = 1.0 / nw;
      v = w / nw;
      if (std::abs(est - prev) <= 1e-9 * est) {
        out.gap = (est - shift) - out.lambda;
        break;
      }
      prev = est;
    }
  }
  return out;
}

/// Heat-kernel density p_D(t, x_i, x_j) = [exp(tL)]_ij / h^d via
/// scaling-and-squaring matrix exponential.
inline Eigen::MatrixXd heat_kernel(const GridOperator& G, double t) {
  if (!(t > 0)) throw std::invalid_argument("heat_kernel: t must be positive");
  Eigen::MatrixXd E = (t * G.L).exp();
  if (!(E.maxCoeff() > 0))
    throw std::runtime_error("heat_kernel: kernel underflowed at this horizon");
  return E / G.cell;
}

/// Transition-mass matrix exp(tL) (rows: survival-weighted laws).
inline Eigen::MatrixXd semigroup_matrix(const GridOperator& G, double t) {
  return heat_kernel(G, t) * G.cell;
}

/// Grid gauge v(x) = E_x e_c(tau): the complement w = 1 - v solves
/// (-L) w = c with the killing already inside L.
inline Eigen::VectorXd grid_gauge(const GridOperator& G) {
  const int n = G.size();
  if (G.killing.lpNorm<Eigen::Infinity>() == 0.0) return Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd w = (-G.L).partialPivLu().solve(G.killing);
  return Eigen::VectorXd::Ones(n) - w;
}

/// Grid resolvent (alpha I - L)^{-1} f. alpha = 0 is allowed: the absorbed
/// generator is invertible on the interior.
inline Eigen::VectorXd grid_resolvent(const GridOperator& G, double alpha,
                                      const Eigen::VectorXd& f) {
  const int n = G.size();
  const Eigen::MatrixXd A = alpha * Eigen::MatrixXd::Identity(n, n) - G.L;
  return A.partialPivLu().solve(f);
}

/// Two-sided intrinsic-ultracontractivity ratios at time t:
/// c_lower <= p(t,x,y) / (phi(x) phi_hat(y)) <= c_upper over all node pairs,
/// with the weighted mean pinned at exp(-lambda t) / int phi phi_hat dm.
struct IuRatio {
  double c_lower = 0, c_upper = 0;
  double sandwich = 0; // exp(-lambda t) / int phi phi_hat dm
};

inline IuRatio iu_ratio(const GridOperator& G, const EigenPair& pair, double t) {
  const Eigen::MatrixXd p = heat_kernel(G, t);
  IuRatio out;
  out.c_lower = std::numeric_limits<double>::infinity();
  out.c_upper = 0;
  for (int i = 0; i < G.size(); ++i)
    for (int j = 0; j < G.size(); ++j) {
      const double r = p(i, j) / (pair.phi[i] * pair.phi_hat[j]);
      out.c_lower = std::min(out.c_lower, r);
      out.c_upper = std::max(out.c_upper, r);
    }
  out.sandwich = std::exp(-pair.lambda * t) / pair.phi_phihat;
  return out;
}

/// Least-squares fit of log phi against log dist-to-boundary over the nodes
/// within the given boundary window.
struct ScalingFit {
  double gamma = 0;
  double r2 = 0;
  int points = 0;
};

inline ScalingFit boundary_scaling_fit(const GridOperator& G, const Eigen::VectorXd& phi,
                                       double window) {
  std::vector<double> lx, ly;
  for (int i = 0; i < G.size(); ++i) {
    const double delta = G.dom->distance_to_boundary(G.nodes[static_cast<size_t>(i)]);
    if (delta > 0 && delta < window && phi[i] > 0) {
      lx.push_back(std::log(delta));
      ly.push_back(std::log(phi[i]));
    }
  }
  if (lx.size() < 10)
    throw std::invalid_argument("boundary_scaling_fit: window holds fewer than 10 nodes");
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t k = 0; k < lx.size(); ++k) {
    sx += lx[k];
    sy += ly[k];
    sxx += lx[k] * lx[k];
    sxy += lx[k] * ly[k];
    syy += ly[k] * ly[k];
  }
  ScalingFit fit;
  fit.points = static_cast<int>(lx.size());
  const double vxx = sxx - sx * sx / n, vxy = sxy - sx * sy / n, vyy = syy - sy * sy / n;
  fit.gamma = vxy / vxx;
  fit.r2 = vyy > 0 ? vxy * vxy / (vxx * vyy) : 1.0;
  return fit;
}

/// Yosida approximation audit for an excessive vector v >= 0:
/// y_k = k (kI - L)^{-1} v must stay below v, increase in k, and close the
/// sup-norm gap to v monotonically.
struct YosidaReport {
  bool excessive = true;      // k y_k <= v at every tested k (precondition audit)
  bool fk_nonneg = true;      // f_k = k (v - y_k) >= 0
  bool monotone = true;       // y_k nondecreasing in k
  bool gap_decreasing = true; // ||v - y_k||_inf decreasing in k
  std::vector<double> gaps;
  bool pass() const { return excessive && fk_nonneg && monotone && gap_decreasing; }
};

inline YosidaReport yosida_monotone_check(const GridOperator& G, const Eigen::VectorXd& v,
                                          const std::vector<double>& ks, double tol = 1e-9) {
  YosidaReport rep;
  const double scale = std::max(1.0, v.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd prev;
  for (double k : ks) {
    if (!(k > 0)) throw std::invalid_argument("yosida_monotone_check: k must be positive");
    const Eigen::VectorXd yk = k * grid_resolvent(G, k, v);
    if (((v - yk).minCoeff()) < -tol * scale) {
      rep.excessive = false;
      rep.fk_nonneg = false;
    }
    if (prev.size() > 0 && (yk - prev).minCoeff() < -tol * scale) rep.monotone = false;
    rep.gaps.push_back((v - yk).lpNorm<Eigen::Infinity>());
    if (rep.gaps.size() > 1 && rep.gaps.back() > rep.gaps[rep.gaps.size() - 2] + tol * scale)
      rep.gap_decreasing = false;
    prev = yk;
  }
  return rep;
}

}  // namespace hopflab
