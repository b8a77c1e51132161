#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "hopflab/domain.hpp"
#include "hopflab/rng.hpp"

using namespace hopflab;

TEST_CASE("interval geometry") {
  Domain d(Interval{0.0, 1.0});
  CHECK(d.dim() == 1);
  CHECK(d.contains(Vec{0.5}));
  CHECK_FALSE(d.contains(Vec{1.5}));
  CHECK(d.distance_to_boundary(Vec{0.25}) == Catch::Approx(0.25));
  CHECK(d.signed_distance(Vec{1.5}) == Catch::Approx(-0.5));
  CHECK(d.distance_to_set(Vec{1.5}) == Catch::Approx(0.5));
  CHECK(d.distance_to_set(Vec{0.5}) == 0.0);
  CHECK(d.diameter() == Catch::Approx(1.0));
  CHECK(d.project_to_boundary(Vec{0.7})[0] == Catch::Approx(1.0));
  CHECK(d.outward_normal(Vec{0.9})[0] == 1.0);
}

TEST_CASE("ball geometry") {
  Domain d(Ball{Vec{0.0, 0.0}, 1.0});
  CHECK(d.dim() == 2);
  CHECK(d.distance_to_boundary(Vec{0.6, 0.0}) == Catch::Approx(0.4));
  CHECK(d.distance_to_set(Vec{3.0, 4.0}) == Catch::Approx(4.0));
  CHECK(d.diameter() == Catch::Approx(2.0));
  const Vec p = d.project_to_boundary(Vec{0.3, 0.4});
  CHECK(norm(p) == Catch::Approx(1.0));
  const Vec n = d.outward_normal(Vec{0.3, 0.4});
  CHECK(n[0] == Catch::Approx(0.6));
  CHECK(n[1] == Catch::Approx(0.8));
}

TEST_CASE("box geometry") {
  Domain d(Box{Vec{0.0, 0.0}, Vec{2.0, 1.0}});
  CHECK(d.signed_distance(Vec{1.0, 0.25}) == Catch::Approx(0.25));
  CHECK(d.signed_distance(Vec{3.0, 0.5}) == Catch::Approx(-1.0));
  CHECK(d.signed_distance(Vec{3.0, 2.0}) == Catch::Approx(-std::sqrt(2.0)));
  const Vec p = d.project_to_boundary(Vec{1.0, 0.9});
  CHECK(p[1] == Catch::Approx(1.0));
}

TEST_CASE("implicit domain matches the ball it encodes") {
  Domain ball(Ball{Vec{0.0, 0.0}, 1.0});
  Implicit im;
  im.dim = 2;
  im.inside = [](const Vec& x) { return norm(x) < 1.0; };
  im.signed_distance = [](const Vec& x) { return 1.0 - norm(x); };
  im.bbox_lo = Vec{-1.0, -1.0};
  im.bbox_hi = Vec{1.0, 1.0};
  Domain d(std::move(im));
  CHECK(d.contains(Vec{0.5, 0.5}));
  CHECK_FALSE(d.contains(Vec{0.9, 0.9}));
  const Vec p = d.project_to_boundary(Vec{0.3, 0.4});
  CHECK(norm(p) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("boundary hit lies on the boundary between the endpoints") {
  Domain d(Ball{Vec{0.0, 0.0}, 1.0});
  const Vec hit = d.boundary_hit(Vec{0.2, 0.1}, Vec{1.8, 0.9});
  CHECK(norm(hit) == Catch::Approx(1.0).margin(1e-10));
  // The hit must lie on the segment.
  const Vec dir = Vec{1.8, 0.9} - Vec{0.2, 0.1};
  const double t = dot(hit - Vec{0.2, 0.1}, dir) / norm2(dir);
  CHECK(t > 0.0);
  CHECK(t < 1.0);
}

TEST_CASE("signed distance is 1-Lipschitz along random segments") {
  Rng rng(77, 0);
  Domain shapes[] = {Domain(Interval{0.0, 1.0}), Domain(Ball{Vec{0.0, 0.0}, 1.0}),
                     Domain(Box{Vec{0.0, 0.0}, Vec{2.0, 1.0}})};
  for (const auto& d : shapes) {
    const int dim = d.dim();
    for (int i = 0; i < 2000; ++i) {
      Vec x(dim), y(dim);
      for (int k = 0; k < dim; ++k) {
        x[k] = rng.uniform(-2.0, 3.0);
        y[k] = rng.uniform(-2.0, 3.0);
      }
      const double lhs = std::abs(d.signed_distance(x) - d.signed_distance(y));
      CHECK(lhs <= norm(x - y) + 1e-12);
    }
  }
}

TEST_CASE("exit classification over the extended boundary") {
  Domain d(Interval{0.0, 1.0});
  const double eps = default_eps_geom(d);

  SupportDescriptor none{SupportDescriptor::Kind::Empty, 0.0};
  SupportDescriptor all{SupportDescriptor::Kind::AllSpace, 0.0};
  SupportDescriptor dil{SupportDescriptor::Kind::Dilation, 0.5};

  CHECK(classify_exit(d, none, Vec{1.0}, eps) == ExitClass::OnBoundary);
  CHECK(classify_exit(d, none, Vec{0.5}, eps) == ExitClass::Interior);
  CHECK(classify_exit(d, none, Vec{1.5}, eps) == ExitClass::OutsideRange);

  CHECK(classify_exit(d, all, Vec{1.7}, eps) == ExitClass::ExteriorRange);
  CHECK(classify_exit(d, all, Vec{-3.0}, eps) == ExitClass::ExteriorRange);

  CHECK(classify_exit(d, dil, Vec{1.3}, eps) == ExitClass::ExteriorRange);
  CHECK(classify_exit(d, dil, Vec{2.2}, eps) == ExitClass::OutsideRange);
  CHECK(classify_exit(d, dil, Vec{1.0 + 1e-12}, eps) == ExitClass::OnBoundary);
}
