#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hopflab/spectral.hpp"

namespace hopflab {

/// Conservative semigroup of the eigenfunction transform:
/// entries e^{lambda t} exp(tL)_ij phi_j / phi_i; rows sum to 1 up to the
/// eigen residual.
inline Eigen::MatrixXd doob_semigroup(const GridOperator& G, const EigenPair& pair, double t) {
  Eigen::MatrixXd P = semigroup_matrix(G, t) * std::exp(pair.lambda * t);
  for (int i = 0; i < P.rows(); ++i)
    for (int j = 0; j < P.cols(); ++j) P(i, j) *= pair.phi[j] / pair.phi[i];
  if (!(P.maxCoeff() > 0)) throw std::runtime_error("doob_semigroup: underflow at this horizon");
  return P;
}

/// Resolvent chain of the transformed process.
struct DoobChain {
  double alpha = 0;
  Eigen::MatrixXd K; // stochastic kernel, alpha (alpha I - L_phi)^{-1}
  const GridOperator* base = nullptr;
  EigenPair pair;
};

/// K_alpha = alpha (alpha I - L_phi)^{-1} with the transformed generator
/// L_phi = phi^{-1} (L + lambda) phi. The diagonal absorbs the eigen
/// residual so that L_phi has exactly zero row sums, which makes K exactly
/// stochastic instead of stochastic-up-to-residual.
inline DoobChain resolvent_chain(const GridOperator& G, const EigenPair& pair, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("resolvent_chain: alpha must be positive");
  const int n = G.size();
  Eigen::MatrixXd Lphi(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (i != j) Lphi(i, j) = G.L(i, j) * pair.phi[j] / pair.phi[i];
    Lphi(i, i) = 0.0;
    Lphi(i, i) = -Lphi.row(i).sum();
  }
  DoobChain chain;
  chain.alpha = alpha;
  chain.base = &G;
  chain.pair = pair;
  const Eigen::MatrixXd A = alpha * Eigen::MatrixXd::Identity(n, n) - Lphi;
  chain.K = alpha * A.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (chain.K(i, j) < -1e-12)
        throw std::runtime_error("resolvent_chain: negative kernel entry beyond roundoff");
      if (chain.K(i, j) < 0) chain.K(i, j) = 0;
    }
  return chain;
}

/// Total-variation distance between two mass vectors, sum-of-absolute
/// convention (values in [0, 2] for probability vectors).
inline double tv_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<1>();
}

/// Geometric-ergodicity diagnostic of a Doob chain: invariant distribution
/// by left power iteration, TV profile over chain steps, and a log-linear
/// rate fit that discards the first 3 transient points and stops once TV
/// falls below 1e-12.
struct ErgodicityReport {
  double rho = 1;
  double r2 = 0;
  bool monotone = true;
  bool fitted = false;
  Eigen::VectorXd pi;
  std::vector<double> profile; // profile[k] = max_x TV(K^{k+1}(x,.), pi)
  bool pass() const { return fitted && monotone && rho < 1.0; }
};

inline ErgodicityReport tv_ergodicity(const DoobChain& chain, int max_steps = 400) {
  const int n = static_cast<int>(chain.K.rows());
  ErgodicityReport rep;

  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 100000; ++it) {
    Eigen::RowVectorXd next = pi * chain.K;
    next /= next.sum();
    const double delta = (next - pi).lpNorm<1>();
    pi = next;
    if (delta < 1e-15) break;
  }
  rep.pi = pi.transpose();

  // Repeated multiplication accumulates roundoff of order n eps per step;
  // once TV reaches that floor the profile is noise, not mixing, so stop
  // against a step-dependent floor rather than a fixed one.
  Eigen::MatrixXd Kn = chain.K;
  double floor_hit = 1e-12;
  for (int step = 1; step <= max_steps; ++step) {
    double worst = 0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, (Kn.row(i) - pi).lpNorm<1>());
    rep.profile.push_back(worst);
    const double floor_k =
        std::max(1e-12, 16.0 * n * std::numeric_limits<double>::epsilon() * step);
    if (worst < floor_k) {
      floor_hit = floor_k;
      break;
    }
    if (step < max_steps) Kn = Kn * chain.K;
  }

  for (size_t k = 1; k < rep.profile.size(); ++k)
    if (rep.profile[k] > rep.profile[k - 1] * (1.0 + 1e-9) + 1e-15) rep.monotone = false;

  // Fit log TV against the step index over the geometric regime.
  std::vector<double> xs, ys;
  for (size_t k = 3; k < rep.profile.size(); ++k)
    if (rep.profile[k] > floor_hit) {
      xs.push_back(static_cast<double>(k + 1));
      ys.push_back(std::log(rep.profile[k]));
    }
  if (xs.size() >= 3) {
    const double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t k = 0; k < xs.size(); ++k) {
      sx += xs[k];
      sy += ys[k];
      sxx += xs[k] * xs[k];
      sxy += xs[k] * ys[k];
      syy += ys[k] * ys[k];
    }
    const double vxx = sxx - sx * sx / m, vxy = sxy - sx * sy / m, vyy = syy - sy * sy / m;
    if (vxx > 0 && vyy > 0) {
      rep.rho = std::exp(vxy / vxx);
      rep.r2 = vxy * vxy / (vxx * vyy);
      rep.fitted = true;
    }
  } else if (!rep.profile.empty() && rep.profile.back() < floor_hit) {
    // Mixing completed before a regression window opened: the chain is as
    // ergodic as the resolution can certify.
    rep.rho = 0;
    rep.r2 = 1;
    rep.fitted = true;
  }
  return rep;
}

/// Quasi-stationary distribution and the uniform convergence profile of the
/// conditional-on-survival law toward it.
struct QsdReport {
  Eigen::VectorXd pi;          // node masses, sums to 1
  std::vector<double> times;
  std::vector<double> profile; // max over start nodes of TV(conditional law, pi)
};

inline QsdReport qsd(const GridOperator& G, const EigenPair& pair,
                     const std::vector<double>& times) {
  QsdReport rep;
  rep.pi = pair.phi_hat * G.cell;
  rep.pi /= rep.pi.sum();
  rep.times = times;
  for (double t : times) {
    const Eigen::MatrixXd P = semigroup_matrix(G, t);
    double worst = 0;
    for (int i = 0; i < G.size(); ++i) {
      const double mass = P.row(i).sum();
      if (!(mass > 0)) throw std::runtime_error("qsd: survival mass underflowed");
      worst = std::max(worst, (P.row(i).transpose() / mass - rep.pi).lpNorm<1>());
    }
    rep.profile.push_back(worst);
  }
  return rep;
}

/// Irreducibility on the grid: every entry of (I - L)^{-1} must be positive.
inline bool irreducibility_check(const GridOperator& G) {
  const int n = G.size();
  const Eigen::MatrixXd M = (Eigen::MatrixXd::Identity(n, n) - G.L)
                                .partialPivLu()
                                .solve(Eigen::MatrixXd::Identity(n, n));
  return M.minCoeff() > 0.0;
}

/// Rank-one lower bound on the resolvent kernel: M_ij >= psi_i nu_j with
/// slack >= 0 by construction.
struct MinorizationCertificate {
  double alpha = 0;
  Eigen::VectorXd psi; // nonnegative node vector
  Eigen::VectorXd nu;  // nonnegative node masses
  double slack = 0;    // min_ij (M_ij - psi_i nu_j)
  bool ok = false;     // nu nontrivial
};

/// Column-anchored constructive split: anchor the column j* whose profile is
/// most parallel across rows (relative to the heaviest row), take psi as
/// that column, and nu as the largest measure the rank-one bound tolerates.
inline MinorizationCertificate minorization_certificate(const GridOperator& G, double alpha) {
  const int n = G.size();
  const Eigen::MatrixXd M = (alpha * Eigen::MatrixXd::Identity(n, n) - G.L)
                                .partialPivLu()
                                .solve(Eigen::MatrixXd::Identity(n, n));
  MinorizationCertificate cert;
  cert.alpha = alpha;
  if (M.minCoeff() <= 0) return cert; // reducible-looking resolvent: no certificate

  int i_ref = 0;
  M.rowwise().sum().maxCoeff(&i_ref);
  int j_star = 0;
  double best = -1;
  for (int j = 0; j < n; ++j) {
    const double q = (M.col(j) / M(i_ref, j)).minCoeff();
    if (q > best) {
      best = q;
      j_star = j;
    }
  }
  cert.psi = M.col(j_star);
  cert.nu = Eigen::VectorXd(n);
  for (int j = 0; j < n; ++j) cert.nu[j] = (M.col(j).array() / cert.psi.array()).minCoeff();
  cert.slack = (M - cert.psi * cert.nu.transpose()).minCoeff();
  cert.ok = cert.nu.maxCoeff() > 0;
  return cert;
}

/// Rescales the certificate against the eigenfunction: c_min = min psi/phi;
/// positive c_min means (phi, c_min nu) is itself a valid minorization pair.
struct PhiMinorization {
  double c_min = 0;
  bool holds = false;
};

inline PhiMinorization minorization_phi_check(const MinorizationCertificate& cert,
                                              const EigenPair& pair) {
  PhiMinorization out;
  if (!cert.ok) return out;
  out.c_min = (cert.psi.array() / pair.phi.array()).minCoeff();
  out.holds = out.c_min > 0;
  return out;
}

/// Truncated dyadic mixture of chain powers, averaged over start nodes: a
/// strictly positive measure exactly when the chain is irreducible. The
/// dropped tail is bounded by 2^{-n_terms}.
struct IrreducibilityMeasure {
  Eigen::VectorXd mu;
  double tail_bound = 0;
};

inline IrreducibilityMeasure maximal_irreducibility_measure(const GridOperator& G, double alpha,
                                                            int n_terms = 20) {
  if (!(alpha > 0)) throw std::invalid_argument("maximal_irreducibility_measure: alpha > 0");
  const int n = G.size();
  const Eigen::MatrixXd K = alpha * (alpha * Eigen::MatrixXd::Identity(n, n) - G.L)
                                        .partialPivLu()
                                        .solve(Eigen::MatrixXd::Identity(n, n));
  IrreducibilityMeasure out;
  out.mu = Eigen::VectorXd::Zero(n);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Constant(n, 1.0 / n); // uniform start mix
  double weight = 1.0;
  for (int k = 1; k <= n_terms; ++k) {
    row = row * K;
    weight *= 0.5;
    out.mu += weight * row.transpose();
  }
  out.tail_bound = weight;
  return out;
}

}  // namespace hopflab
