#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <variant>

#include "hopflab/common.hpp"

namespace hopflab {

/// Open interval (a,b) on the line.
struct Interval {
  double a, b;
};

/// Open ball about a center.
struct Ball {
  Vec center;
  double radius;
};

/// Open axis-aligned box.
struct Box {
  Vec lo, hi;
};

/// Domain given by callables: membership, signed distance to the boundary
/// (positive inside, negative outside) and a bounding box. The signed
/// distance only needs to be 1-Lipschitz and correct in sign; exactness
/// improves exit localization but is not required.
struct Implicit {
  int dim = 1;
  std::function<bool(const Vec&)> inside;
  std::function<double(const Vec&)> signed_distance;
  Vec bbox_lo, bbox_hi;
};

/// Bounded open domain. Exact geometry for interval, ball and box;
/// callable-backed geometry otherwise.
class Domain {
 public:
  explicit Domain(Interval iv) : shape_(iv) {
    if (!(iv.b > iv.a)) throw std::invalid_argument("Domain: interval needs a < b");
  }
  explicit Domain(Ball b) : shape_(b) {
    if (!(b.radius > 0)) throw std::invalid_argument("Domain: ball needs radius > 0");
  }
  explicit Domain(Box b) : shape_(b) {
    for (int i = 0; i < b.lo.d; ++i)
      if (!(b.hi[i] > b.lo[i])) throw std::invalid_argument("Domain: box needs lo < hi");
  }
  explicit Domain(Implicit im) : shape_(std::move(im)) {}

  int dim() const {
    return std::visit(
        [](const auto& s) -> int {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Interval>) return 1;
          if constexpr (std::is_same_v<T, Ball>) return s.center.d;
          if constexpr (std::is_same_v<T, Box>) return s.lo.d;
          if constexpr (std::is_same_v<T, Implicit>) return s.dim;
        },
        shape_);
  }

  /// Signed distance to the boundary, positive inside.
  double signed_distance(const Vec& x) const {
    return std::visit(
        [&](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Interval>) {
            return std::min(x[0] - s.a, s.b - x[0]);
          } else if constexpr (std::is_same_v<T, Ball>) {
            return s.radius - norm(x - s.center);
          } else if constexpr (std::is_same_v<T, Box>) {
            // Inside: min face distance. Outside: minus distance to the box.
            double inside_min = std::numeric_limits<double>::infinity();
            double out2 = 0;
            for (int i = 0; i < s.lo.d; ++i) {
              inside_min = std::min({inside_min, x[i] - s.lo[i], s.hi[i] - x[i]});
              const double e = std::max({s.lo[i] - x[i], 0.0, x[i] - s.hi[i]});
              out2 += e * e;
            }
            return out2 > 0 ? -std::sqrt(out2) : inside_min;
          } else {
            return s.signed_distance(x);
          }
        },
        shape_);
  }

  bool contains(const Vec& x) const {
    if (const auto* im = std::get_if<Implicit>(&shape_)) return im->inside(x);
    return signed_distance(x) > 0;
  }

  /// Distance from x to the boundary (absolute value of the signed distance).
  double distance_to_boundary(const Vec& x) const { return std::abs(signed_distance(x)); }

  /// Distance from x to the closed set D. Zero inside.
  double distance_to_set(const Vec& x) const { return std::max(0.0, -signed_distance(x)); }

  void bounding_box(Vec& lo, Vec& hi) const {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Interval>) {
            lo = Vec{s.a};
            hi = Vec{s.b};
          } else if constexpr (std::is_same_v<T, Ball>) {
            lo = s.center;
            hi = s.center;
            for (int i = 0; i < s.center.d; ++i) {
              lo[i] -= s.radius;
              hi[i] += s.radius;
            }
          } else if constexpr (std::is_same_v<T, Box>) {
            lo = s.lo;
            hi = s.hi;
          } else {
            lo = s.bbox_lo;
            hi = s.bbox_hi;
          }
        },
        shape_);
  }

  /// Diameter of D. Exact for the closed-form shapes, bounding-box diagonal
  /// (an upper bound, which keeps certificates conservative) otherwise.
  double diameter() const {
    if (const auto* iv = std::get_if<Interval>(&shape_)) return iv->b - iv->a;
    if (const auto* b = std::get_if<Ball>(&shape_)) return 2.0 * b->radius;
    Vec lo(dim()), hi(dim());
    bounding_box(lo, hi);
    return norm(hi - lo);
  }

  /// Nearest boundary point. Exact for closed-form shapes; for implicit
  /// domains a few damped Newton steps on the signed distance.
  Vec project_to_boundary(const Vec& x) const {
    return std::visit(
        [&](const auto& s) -> Vec {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Interval>) {
            return Vec{(x[0] - s.a <= s.b - x[0]) ? s.a : s.b};
          } else if constexpr (std::is_same_v<T, Ball>) {
            Vec r = x - s.center;
            const double n = norm(r);
            if (n < 1e-300) {
              Vec p = s.center;
              p[0] += s.radius;
              return p;
            }
            return s.center + (s.radius / n) * r;
          } else if constexpr (std::is_same_v<T, Box>) {
            if (!contains(x)) {
              Vec p = x;
              for (int i = 0; i < s.lo.d; ++i) p[i] = std::clamp(p[i], s.lo[i], s.hi[i]);
              if (!contains(p)) return p;  // x was outside, clamp hit the boundary
            }
            // Inside (or clamped into the interior): move to the nearest face.
            Vec p = x;
            int best = 0;
            double bestd = std::numeric_limits<double>::infinity();
            double target = 0;
            for (int i = 0; i < s.lo.d; ++i) {
              if (p[i] - s.lo[i] < bestd) {
                bestd = p[i] - s.lo[i];
                best = i;
                target = s.lo[i];
              }
              if (s.hi[i] - p[i] < bestd) {
                bestd = s.hi[i] - p[i];
                best = i;
                target = s.hi[i];
              }
            }
            p[best] = target;
            return p;
          } else {
            Vec p = x;
            for (int it = 0; it < 64; ++it) {
              const double sd = s.signed_distance(p);
              if (std::abs(sd) < 1e-12) break;
              const Vec g = sdf_gradient(p);
              const double g2 = std::max(norm2(g), 1e-12);
              p -= (sd / g2) * g;
            }
            return p;
          }
        },
        shape_);
  }

  /// Unit outward normal at (or near) the boundary point closest to x.
  Vec outward_normal(const Vec& x) const {
    return std::visit(
        [&](const auto& s) -> Vec {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Interval>) {
            return Vec{(x[0] - s.a <= s.b - x[0]) ? -1.0 : 1.0};
          } else if constexpr (std::is_same_v<T, Ball>) {
            Vec r = x - s.center;
            const double n = norm(r);
            if (n < 1e-300) {
              Vec e(x.d);
              e[0] = 1;
              return e;
            }
            return (1.0 / n) * r;
          } else if constexpr (std::is_same_v<T, Box>) {
            int best = 0;
            double bestd = std::numeric_limits<double>::infinity();
            double sign = -1;
            for (int i = 0; i < s.lo.d; ++i) {
              if (x[i] - s.lo[i] < bestd) {
                bestd = x[i] - s.lo[i];
                best = i;
                sign = -1;
              }
              if (s.hi[i] - x[i] < bestd) {
                bestd = s.hi[i] - x[i];
                best = i;
                sign = 1;
              }
            }
            Vec n(s.lo.d);
            n[best] = sign;
            return n;
          } else {
            Vec g = sdf_gradient(x);
            const double n = norm(g);
            if (n < 1e-300) {
              Vec e(x.d);
              e[0] = 1;
              return e;
            }
            return (-1.0 / n) * g;  // signed distance decreases outward
          }
        },
        shape_);
  }

  /// First boundary crossing of the segment from x_in (inside) to x_out
  /// (outside), as a point on the boundary.
  Vec boundary_hit(const Vec& x_in, const Vec& x_out) const {
    // Bisection on the signed distance is robust for every shape and
    // converges to machine precision in ~60 steps; closed-form shapes
    // get an exact warm start from the clamped parametric solution.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const Vec p = x_in + mid * (x_out - x_in);
      if (signed_distance(p) > 0)
        lo = mid;
      else
        hi = mid;
    }
    return project_to_boundary(x_in + (0.5 * (lo + hi)) * (x_out - x_in));
  }

  const std::variant<Interval, Ball, Box, Implicit>& shape() const { return shape_; }

 private:
  Vec sdf_gradient(const Vec& p) const {
    const auto& s = std::get<Implicit>(shape_);
    const double h = 1e-6 * std::max(1.0, norm(p));
    Vec g(p.d);
    for (int i = 0; i < p.d; ++i) {
      Vec pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      g[i] = (s.signed_distance(pp) - s.signed_distance(pm)) / (2 * h);
    }
    return g;
  }

  std::variant<Interval, Ball, Box, Implicit> shape_;
};

/// Where mass reachable by a single jump from inside D can land.
struct SupportDescriptor {
  enum class Kind { Empty, AllSpace, Dilation } kind = Kind::Empty;
  double radius = 0.0;  // Dilation only: jump support radius

  /// True if y can carry jump mass from some point of D.
  bool covers(const Domain& dom, const Vec& y, double eps = 0.0) const {
    switch (kind) {
      case Kind::Empty:
        return false;
      case Kind::AllSpace:
        return true;
      case Kind::Dilation:
        return dom.distance_to_set(y) <= radius + eps;
    }
    return false;
  }
};

enum class ExitClass { Interior, OnBoundary, ExteriorRange, OutsideRange };

inline const char* to_string(ExitClass c) {
  switch (c) {
    case ExitClass::Interior: return "interior";
    case ExitClass::OnBoundary: return "on_boundary";
    case ExitClass::ExteriorRange: return "exterior_range";
    case ExitClass::OutsideRange: return "outside_range";
  }
  return "?";
}

/// Classify a point relative to the boundary extended by the jump support.
/// Points within eps of the boundary count as OnBoundary; exterior points
/// inside the jump support classify as ExteriorRange. A well-formed exit
/// position never classifies as OutsideRange.
inline ExitClass classify_exit(const Domain& dom, const SupportDescriptor& support, const Vec& y,
                               double eps) {
  const double sd = dom.signed_distance(y);
  if (std::abs(sd) <= eps) return ExitClass::OnBoundary;
  if (sd > 0) return ExitClass::Interior;
  return support.covers(dom, y, eps) ? ExitClass::ExteriorRange : ExitClass::OutsideRange;
}

/// Default geometric tolerance for exit classification.
inline double default_eps_geom(const Domain& dom) { return 1e-9 * dom.diameter(); }

}  // namespace hopflab
