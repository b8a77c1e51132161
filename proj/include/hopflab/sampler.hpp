#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hopflab/common.hpp"
#include "hopflab/domain.hpp"
#include "hopflab/estimate.hpp"
#include "hopflab/generator.hpp"
#include "hopflab/rng.hpp"

namespace hopflab {

/// How the stable part is advanced.
enum class StableStepRule {
  ExactIncrement,      // marginally exact draw per time step
  CompoundTruncation,  // small jumps folded into diffusion, big jumps thinned
};

struct PathConfig {
  double dt = 1e-3;
  double t_max = 50.0;
  bool bridge_correction = true;
  bool antithetic = false;
  StableStepRule stable_rule = StableStepRule::ExactIncrement;
  double truncation_cut = 1e-2;  // delta_cut for CompoundTruncation
  std::uint64_t seed = 0;
  int workers = 1;  // 0 = hardware concurrency

  void validate() const {
    if (!(dt > 0)) throw std::invalid_argument("PathConfig: dt must be positive");
    if (!(t_max > 0)) throw std::invalid_argument("PathConfig: t_max must be positive");
    if (workers < 0) throw std::invalid_argument("PathConfig: workers must be >= 0");
    if (stable_rule == StableStepRule::CompoundTruncation && !(truncation_cut > 0))
      throw std::invalid_argument("PathConfig: truncation cut must be positive");
  }
};

/// Outcome of one path run to the exit time (or censoring horizon).
struct ExitRecord {
  double tau = 0.0;
  Vec x_exit;
  double c_integral = 0.0;  // int_0^tau c(X_r) dr
  double e_c = 1.0;         // exp(-c_integral), stored to keep the identity exact
  bool censored = false;
  bool exit_by_jump = false;
  ExitClass exit_class = ExitClass::Interior;
};

namespace detail {

/// Observers see every sub-step: left endpoint time and state, the elapsed
/// sub-step length, and the accumulated killing integral at the left
/// endpoint. Discounted occupation functionals integrate from these.
struct NullObserver {
  void on_step(double, const Vec&, double, double) {}
};

/// Per-batch precomputed sampling plan.
struct PreparedSampler {
  const GeneratorSpec* spec;
  const Domain* dom;
  int d;
  bool has_diffusion = false;
  bool iso_diffusion = true;
  double iso_q = 0;  // isotropic diffusion coefficient, possibly augmented
  bool drift_zero = true;
  bool drift_is_const = true;
  Vec drift_const;
  bool c_const = true;
  double c_val = 0;
  enum class JumpPlan { None, StableExact, Thinned } plan = JumpPlan::None;
  double stable_order = 0, stable_scale = 0;
  double thin_rate = 0;  // upper bound used by the thinning clock
  bool thin_is_cp = false;
  const CompoundPoisson* cp = nullptr;
  double trunc_cut = 0;  // truncated stable: smallest resolved jump
  SupportDescriptor support;
  double eps_exit = 0;

  PreparedSampler(const GeneratorSpec& s, const Domain& dm, const PathConfig& cfg)
      : spec(&s), dom(&dm), d(s.dim) {
    s.validate();
    cfg.validate();
    if (dm.dim() != s.dim) throw std::invalid_argument("sampler: dimension mismatch");
    iso_diffusion = s.diffusion.is_isotropic();
    iso_q = s.diffusion.isotropic_value();
    drift_is_const = s.drift.is_constant();
    drift_zero = s.drift.is_zero();
    drift_const = drift_is_const ? s.drift.constant_value() : Vec::zero(d);
    c_const = s.killing.is_constant();
    c_val = c_const ? s.killing.constant_value() : 0;
    support = range_of_nonlocality(s);
    eps_exit = default_eps_geom(dm);

    if (const auto* st = std::get_if<IsotropicStable>(&s.jumps)) {
      stable_order = st->order;
      stable_scale = st->scale;
      if (cfg.stable_rule == StableStepRule::ExactIncrement) {
        plan = JumpPlan::StableExact;
      } else {
        if (!iso_diffusion)
          throw std::invalid_argument("sampler: truncated stable rule needs isotropic diffusion");
        plan = JumpPlan::Thinned;
        trunc_cut = cfg.truncation_cut;
        const double C = stable_normalization(d, st->order) * st->scale;
        const double omega = sphere_surface(d);
        // Jumps above the cut become a Poisson stream; the compensated
        // remainder below the cut becomes extra isotropic diffusion.
        thin_rate = C * omega * std::pow(trunc_cut, -st->order) / st->order;
        iso_q += C * omega * std::pow(trunc_cut, 2.0 - st->order) / (d * (2.0 - st->order));
      }
    } else if (const auto* cpp = std::get_if<CompoundPoisson>(&s.jumps)) {
      plan = JumpPlan::Thinned;
      thin_is_cp = true;
      cp = cpp;
      thin_rate = cpp->rate.is_constant() ? cpp->rate.constant_value() : cpp->rate.declared_hi();
    }
    has_diffusion = iso_diffusion ? iso_q > 0 : s.diffusion.lambda_max() > 0;
  }

  /// Pareto draw of a truncated-stable jump radius: P(R > r) = (cut/r)^s.
  double truncated_radius(Rng& rng) const {
    return trunc_cut * std::pow(rng.uniform(), -1.0 / stable_order);
  }
};

}  // namespace detail

/// Simulates one path until it leaves the domain or reaches t_max.
/// Jump-adapted Euler scheme: the continuous part moves first within each
/// step (with an optional diffusion bridge test against the boundary), the
/// jump part lands at its sampled target afterwards. Jump overshoot exits
/// at the target point; continuous crossings exit on the boundary. Killing
/// accumulates by the left-endpoint rule. `sign` mirrors all symmetric
/// draws and implements antithetic partners.
template <class Observer = detail::NullObserver>
ExitRecord simulate_exit_prepared(const detail::PreparedSampler& P, const Vec& x0,
                                  const PathConfig& cfg, Rng& rng, double sign = 1.0,
                                  Observer&& obs = Observer{}) {
  const Domain& dom = *P.dom;
  if (!dom.contains(x0)) throw std::invalid_argument("simulate_exit: start point not in domain");

  ExitRecord rec;
  rec.x_exit = x0;
  Vec x = x0;
  double t = 0.0, c_int = 0.0;
  double sd_x = dom.signed_distance(x);

  double next_jump = std::numeric_limits<double>::infinity();
  const bool thinned = P.plan == detail::PreparedSampler::JumpPlan::Thinned;
  if (thinned && P.thin_rate > 0) next_jump = rng.exponential() / P.thin_rate;

  auto finish_exit = [&](double tau, const Vec& where, bool by_jump) {
    rec.tau = tau;
    rec.x_exit = where;
    rec.exit_by_jump = by_jump;
    rec.exit_class = classify_exit(dom, P.support, where, P.eps_exit);
    rec.c_integral = c_int;
    rec.e_c = std::exp(-c_int);
    return rec;
  };

  while (t < cfg.t_max) {
    const double step_end = std::min(t + cfg.dt, cfg.t_max);
    const double t_next = thinned ? std::min(step_end, next_jump) : step_end;
    const double dt_eff = t_next - t;
    const double c_here = P.c_const ? P.c_val : (*P.spec).killing(x);

    if (dt_eff > 0) {
      Vec x_new = x;
      if (!P.drift_zero) {
        const Vec b = P.drift_is_const ? P.drift_const : (*P.spec).drift(x);
        x_new += dt_eff * b;
      }
      if (P.has_diffusion) {
        const double sq = std::sqrt(dt_eff);
        if (P.iso_diffusion) {
          const double s = sign * std::sqrt(P.iso_q) * sq;
          for (int i = 0; i < P.d; ++i) x_new[i] += s * rng.gauss();
        } else {
          Vec z = rng.gauss_vec(P.d);
          x_new += (sign * sq) * (*P.spec).diffusion.apply_sigma(z);
        }
      }
      const double sd_new = dom.signed_distance(x_new);
      if (sd_new <= 0) {
        // Continuous crossing: the exit point is on the boundary.
        const Vec hit = dom.boundary_hit(x, x_new);
        const double seg = std::max(norm(x_new - x), 1e-300);
        const double theta = std::min(1.0, norm(hit - x) / seg);
        const double dt_part = theta * dt_eff;
        obs.on_step(t, x, dt_part, c_int);
        c_int += c_here * dt_part;
        return finish_exit(t + dt_part, hit, false);
      }
      if (cfg.bridge_correction && P.has_diffusion) {
        // Probability that the diffusion bridge touched the boundary inside
        // the step, with variance taken along the boundary normal.
        double var_n;
        if (P.iso_diffusion) {
          var_n = P.iso_q;
        } else {
          const Vec nrm = dom.outward_normal(sd_x <= sd_new ? x : x_new);
          var_n = 0;
          for (int i = 0; i < P.d; ++i)
            for (int j = 0; j < P.d; ++j) var_n += nrm[i] * (*P.spec).diffusion.entry(i, j) * nrm[j];
        }
        if (var_n > 0 && rng.uniform() < std::exp(-2.0 * sd_x * sd_new / (var_n * dt_eff))) {
          const double theta = sd_x / std::max(sd_x + sd_new, 1e-300);
          const double dt_part = theta * dt_eff;
          obs.on_step(t, x, dt_part, c_int);
          c_int += c_here * dt_part;
          const Vec hit = dom.project_to_boundary(sd_x <= sd_new ? x : x_new);
          return finish_exit(t + dt_part, hit, false);
        }
      }
      obs.on_step(t, x, dt_eff, c_int);
      c_int += c_here * dt_eff;
      x = x_new;
      sd_x = sd_new;
    }
    t = t_next;

    if (P.plan == detail::PreparedSampler::JumpPlan::StableExact && dt_eff > 0) {
      // Marginally exact stable increment for the elapsed sub-step.
      const Vec j = rng.stable_isotropic(P.stable_order, P.d);
      const double amp = sign * std::pow(P.stable_scale * dt_eff, 1.0 / P.stable_order);
      const Vec target = x + amp * j;
      const double sd_t = dom.signed_distance(target);
      if (sd_t <= 0) return finish_exit(t, target, true);
      x = target;
      sd_x = sd_t;
    } else if (thinned && t >= next_jump) {
      next_jump = t + rng.exponential() / P.thin_rate;
      bool accept = true;
      Vec j(P.d);
      if (P.thin_is_cp) {
        if (!P.cp->rate.is_constant()) accept = rng.uniform() * P.thin_rate < P.cp->rate(x);
        if (accept) j = P.cp->jump.sample(P.d, rng);
      } else {
        const double r = P.truncated_radius(rng);
        if (P.d == 1) {
          j[0] = rng.uniform() < 0.5 ? -r : r;
        } else {
          Vec z = rng.gauss_vec(P.d);
          j = (r / std::max(norm(z), 1e-300)) * z;
        }
      }
      if (accept) {
        const Vec target = x + sign * j;
        const double sd_t = dom.signed_distance(target);
        if (sd_t <= 0) return finish_exit(t, target, true);
        x = target;
        sd_x = sd_t;
      }
    }
  }

  rec.tau = cfg.t_max;
  rec.x_exit = x;
  rec.censored = true;
  rec.exit_class = ExitClass::Interior;
  rec.c_integral = c_int;
  rec.e_c = std::exp(-c_int);
  return rec;
}

/// One path with its substream derived from (cfg.seed, path_index).
template <class Observer = detail::NullObserver>
ExitRecord simulate_exit(const GeneratorSpec& spec, const Domain& dom, const Vec& x0,
                         const PathConfig& cfg, std::uint64_t path_index = 0,
                         Observer&& obs = Observer{}) {
  detail::PreparedSampler prepared(spec, dom, cfg);
  const std::uint64_t stream = cfg.antithetic ? path_index / 2 : path_index;
  const double sign = cfg.antithetic && (path_index & 1) ? -1.0 : 1.0;
  Rng rng(cfg.seed, stream);
  return simulate_exit_prepared(prepared, x0, cfg, rng, sign, std::forward<Observer>(obs));
}

namespace detail {

inline int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Shared block size for work scheduling and statistics. Each block is
/// processed by exactly one worker in ascending index order, so block-local
/// accumulators see a fixed summation order regardless of scheduling.
constexpr std::int64_t kStatsBlock = 1024;

/// Runs fn(i) for i in [0, n) over a worker pool. Work is handed out in
/// fixed blocks; fn must depend only on i, so results are scheduling-free.
template <class Fn>
void parallel_paths(std::int64_t n, int workers, Fn&& fn) {
  const int nw = resolve_workers(workers);
  constexpr std::int64_t kBlock = kStatsBlock;
  if (nw <= 1 || n < 2 * kBlock) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next_block{0};
  const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(nw));
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&] {
      try {
        while (true) {
          const std::int64_t blk = next_block.fetch_add(1);
          if (blk >= nblocks) return;
          const std::int64_t lo = blk * kBlock, hi = std::min(n, lo + kBlock);
          for (std::int64_t i = lo; i < hi; ++i) fn(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Aggregates per-path scalars into block-local sums that are merged in
/// index order, so summaries do not depend on the worker count.
class BlockStats {
 public:
  explicit BlockStats(std::int64_t n)
      : blocks_(static_cast<size_t>((n + detail::kStatsBlock - 1) / detail::kStatsBlock + 1)) {}
  void add(std::int64_t i, double v) {
    blocks_[static_cast<size_t>(i / detail::kStatsBlock)].add(v);
  }
  RunningStats total() const {
    RunningStats t;
    for (const auto& b : blocks_) t.merge(b);
    return t;
  }

 private:
  std::vector<RunningStats> blocks_;
};

struct BatchSummary {
  std::int64_t n = 0;
  Estimate tau;  // censored paths contribute t_max, a lower bound
  Estimate e_c;  // censored paths contribute their running value
  std::int64_t censored = 0;
  std::int64_t exits_on_boundary = 0;
  std::int64_t exits_exterior_range = 0;
  std::int64_t exits_outside_range = 0;  // stays 0 for well-formed kernels
  std::int64_t exits_by_jump = 0;
};

/// Runs n independent paths and aggregates exit statistics. Bitwise
/// reproducible for fixed (seed, n) regardless of the worker count.
inline BatchSummary simulate_batch(const GeneratorSpec& spec, const Domain& dom, const Vec& x0,
                                   const PathConfig& cfg, std::int64_t n,
                                   std::vector<ExitRecord>* sink = nullptr) {
  detail::PreparedSampler prepared(spec, dom, cfg);
  BlockStats tau_stats(n), ec_stats(n);
  struct Counts {
    std::int64_t censored = 0, on_boundary = 0, exterior = 0, outside = 0, by_jump = 0;
  };
  std::vector<Counts> counts(
      static_cast<size_t>((n + detail::kStatsBlock - 1) / detail::kStatsBlock + 1));
  if (sink) sink->assign(static_cast<size_t>(n), ExitRecord{});

  detail::parallel_paths(n, cfg.workers, [&](std::int64_t i) {
    const std::uint64_t stream =
        cfg.antithetic ? static_cast<std::uint64_t>(i) / 2 : static_cast<std::uint64_t>(i);
    const double sign = cfg.antithetic && (i & 1) ? -1.0 : 1.0;
    Rng rng(cfg.seed, stream);
    const ExitRecord rec = simulate_exit_prepared(prepared, x0, cfg, rng, sign);
    tau_stats.add(i, rec.tau);
    ec_stats.add(i, rec.e_c);
    auto& c = counts[static_cast<size_t>(i / detail::kStatsBlock)];
    if (rec.censored) ++c.censored;
    switch (rec.exit_class) {
      case ExitClass::OnBoundary: ++c.on_boundary; break;
      case ExitClass::ExteriorRange: ++c.exterior; break;
      case ExitClass::OutsideRange: ++c.outside; break;
      default: break;
    }
    if (rec.exit_by_jump) ++c.by_jump;
    if (sink) (*sink)[static_cast<size_t>(i)] = rec;
  });

  BatchSummary out;
  out.n = n;
  const RunningStats ts = tau_stats.total(), es = ec_stats.total();
  out.tau = {ts.mean(), ts.stderr_mean(), n, cfg.seed, 0.0};
  out.e_c = {es.mean(), es.stderr_mean(), n, cfg.seed, 0.0};
  for (const auto& c : counts) {
    out.censored += c.censored;
    out.exits_on_boundary += c.on_boundary;
    out.exits_exterior_range += c.exterior;
    out.exits_outside_range += c.outside;
    out.exits_by_jump += c.by_jump;
  }
  return out;
}

/// Mean residual of the local martingale f(X_t) - f(X_0) - int_0^t Af(X_r) dr,
/// stopped at the earlier of the horizon and the exit time. Zero within
/// statistical error when af is the generator applied to f.
inline Estimate martingale_residual(const GeneratorSpec& spec, const Domain& dom,
                                    const std::function<double(const Vec&)>& f,
                                    const std::function<double(const Vec&)>& af, const Vec& x0,
                                    double horizon, std::int64_t n, PathConfig cfg) {
  cfg.t_max = horizon;
  detail::PreparedSampler prepared(spec, dom, cfg);
  BlockStats stats(n);
  struct IntObserver {
    const std::function<double(const Vec&)>* af;
    double acc = 0;
    void on_step(double, const Vec& x, double dt_eff, double) { acc += (*af)(x) * dt_eff; }
  };
  detail::parallel_paths(n, cfg.workers, [&](std::int64_t i) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(i));
    IntObserver obs{&af};
    const ExitRecord rec = simulate_exit_prepared(prepared, x0, cfg, rng, 1.0, obs);
    stats.add(i, f(rec.x_exit) - f(x0) - obs.acc);
  });
  const RunningStats s = stats.total();
  return {s.mean(), s.stderr_mean(), n, cfg.seed, 0.0};
}

}  // namespace hopflab
