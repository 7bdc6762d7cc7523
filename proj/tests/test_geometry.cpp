#include <cmath>
#include <random>

#include <doctest.h>

#include "ebmfem/errors.hpp"
#include "ebmfem/geometry.hpp"

using namespace ebmfem;

namespace {

ImplicitBoundary circle(double r) { return {BoundaryKind::PerturbedCircle, r, 0.0, 0, {0.0, 0.0}}; }
ImplicitBoundary lobed() { return {BoundaryKind::PerturbedCircle, 0.5, 0.1, 5, {0.0, 0.0}}; }

Vec2 fd_gradient(const std::function<double(Point2)>& f, Point2 p, double h) {
  return {(f({p.x + h, p.y}) - f({p.x - h, p.y})) / (2 * h), (f({p.x, p.y + h}) - f({p.x, p.y - h})) / (2 * h)};
}

}  // namespace

TEST_CASE("level on circles and lobed curves") {
  CHECK(level(circle(0.5), {0.0, 0.0}) == doctest::Approx(-0.5));
  CHECK(level(circle(0.5), {0.5, 0.0}) == doctest::Approx(0.0));
  CHECK(level(lobed(), {0.7, 0.0}) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("level sign matches rho - r(theta) at random points") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& b : {test_boundary_1(), test_boundary_2(), lobed()}) {
    for (int i = 0; i < 1000; ++i) {
      const Point2 p{u(gen), u(gen)};
      const double rho = std::hypot(p.x, p.y);
      const double th = std::atan2(p.y, p.x);
      const double r = b.r0 + b.eps * std::cos(b.k * th);
      CHECK((level(b, p) < 0.0) == (rho < r));
    }
  }
}

TEST_CASE("segment intersection") {
  auto q = segment_intersection(circle(0.5), {0.0, 0.0}, {1.0, 0.0});
  REQUIRE(q);
  CHECK(q->x == doctest::Approx(0.5).epsilon(1e-11));
  CHECK(q->y == 0.0);
  CHECK_FALSE(segment_intersection(circle(0.5), {0.6, 0.0}, {1.0, 0.0}));

  q = segment_intersection(lobed(), {0.0, 0.0}, {1.0, 0.0});
  REQUIRE(q);
  CHECK(q->x == doctest::Approx(0.6).epsilon(1e-11));

  SUBCASE("random chords land on the curve within the parameter tolerance") {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    const auto b = test_boundary_2();
    for (int i = 0; i < 200; ++i) {
      const double th = ang(gen);
      const Point2 p0{0.1 * std::cos(th), 0.1 * std::sin(th)};
      const Point2 p1{0.95 * std::cos(th + 0.05), 0.95 * std::sin(th + 0.05)};
      const auto t = segment_intersection_param(b, p0, p1, 1e-12);
      REQUIRE(t);
      CHECK(*t >= 0.0);
      CHECK(*t <= 1.0);
      const double len = norm(p1 - p0);
      const double slack = 2e-12 * len * b.lipschitz_bound();
      CHECK(std::abs(level(b, lerp(p0, p1, *t))) <= slack);
    }
  }
}

TEST_CASE("outward normal") {
  const Vec2 n0 = outward_normal(circle(0.5), {0.5, 0.0});
  CHECK(n0.x == doctest::Approx(1.0));
  CHECK(n0.y == doctest::Approx(0.0));
  const Vec2 n1 = outward_normal(circle(0.5), {0.0, -0.5});
  CHECK(n1.x == doctest::Approx(0.0));
  CHECK(n1.y == doctest::Approx(-1.0));

  SUBCASE("agrees with a finite-difference gradient at boundary points") {
    for (const auto& b : {lobed(), test_boundary_1(), test_boundary_2()}) {
      for (int i = 0; i < 100; ++i) {
        const double th = 2.0 * M_PI * i / 100.0 + 0.013;
        const double r = b.radius(th);
        const Point2 p{r * std::cos(th), r * std::sin(th)};
        const Vec2 g = fd_gradient([&](Point2 x) { return level(b, x); }, p, 1e-6);
        const Vec2 want = (1.0 / norm(g)) * g;
        const Vec2 got = outward_normal(b, p);
        CHECK(norm(got - want) <= 1e-8);
        CHECK(norm(got) == doctest::Approx(1.0).epsilon(1e-14));
      }
    }
  }
  CHECK_THROWS_AS(outward_normal(circle(0.5), {0.0, 0.0}), DegenerateGradient);
}

TEST_CASE("exact solution") {
  auto v = exact_eval({0.0, 0.0});
  CHECK(v.phi == doctest::Approx(1.0));
  CHECK(v.grad.x == 0.0);
  CHECK(v.f == doctest::Approx(2.0));
  v = exact_eval({1.0, 0.0});
  const double e = std::exp(0.5);
  CHECK(v.phi == doctest::Approx(e));
  CHECK(v.grad.x == doctest::Approx(e));
  CHECK(v.f == doctest::Approx(3.0 * e));

  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto phi = [](Point2 p) { return exact_eval(p).phi; };
  for (int i = 0; i < 100; ++i) {
    const Point2 p{u(gen), u(gen)};
    const auto ex = exact_eval(p);
    const Vec2 g = fd_gradient(phi, p, 1e-6);
    CHECK(norm(g - ex.grad) <= 1e-8 * std::max(1.0, norm(ex.grad)));
    const double h = 1e-4;
    const double lap = (phi({p.x + h, p.y}) + phi({p.x - h, p.y}) + phi({p.x, p.y + h}) + phi({p.x, p.y - h}) -
                        4.0 * phi(p)) /
                       (h * h);
    CHECK(std::abs(lap - ex.f) <= 1e-6 * ex.f);
  }
}

TEST_CASE("neumann data") {
  const double want = 0.5 * std::exp(0.125);
  CHECK(neumann_g(circle(0.5), {0.5, 0.0}) == doctest::Approx(want));
  CHECK(neumann_g(circle(0.5), {0.0, 0.5}) == doctest::Approx(want));
  // On the x axis of a lobed curve both n and grad phi are radial; at a
  // lobe flank grad phi is still radial while n tilts.
  const auto b = lobed();
  const double th = M_PI / 10.0;
  const double r = b.radius(th);
  const Point2 p{r * std::cos(th), r * std::sin(th)};
  CHECK(neumann_g(b, p) == doctest::Approx(dot(outward_normal(b, p), exact_eval(p).grad)));
}

TEST_CASE("projection onto the boundary") {
  const Point2 a = project_to_boundary(circle(0.5), {0.6, 0.0});
  CHECK(a.x == doctest::Approx(0.5));
  const Point2 b = project_to_boundary(circle(0.5), {0.3, 0.0});
  CHECK(b.x == doctest::Approx(0.5));

  const auto pc = test_boundary_1();
  const Point2 p{0.55, 0.05};
  const Point2 q = project_to_boundary(pc, p);
  CHECK(std::abs(level(pc, q)) <= 1e-12);
  CHECK(std::abs(cross(q, p)) <= 1e-14);  // on the ray from the center
  // Bisection along the ray agrees.
  const auto t = segment_intersection_param(pc, {0.0, 0.0}, 2.0 * p, 1e-13);
  REQUIRE(t);
  CHECK(norm(q - lerp({0.0, 0.0}, 2.0 * p, *t)) <= 1e-11);
  // Fixed point.
  CHECK(norm(project_to_boundary(pc, q) - q) <= 1e-15);
}

TEST_CASE("boundary serialization") {
  const auto b = test_boundary_2();
  const auto c = parse_boundary(format_boundary(b));
  CHECK(c.kind == b.kind);
  CHECK(c.r0 == b.r0);
  CHECK(c.eps == b.eps);
  CHECK(c.k == b.k);
  const auto s = parse_boundary("StarBoundary, 0.4, 0.1, 3, 0.05, -0.02");
  CHECK(s.kind == BoundaryKind::StarBoundary);
  CHECK(s.center.y == doctest::Approx(-0.02));
  CHECK_THROWS_AS(parse_boundary("PerturbedCircle 0.5 0.6 3 0 0"), InvalidArgument);
  CHECK_THROWS_AS(parse_boundary("Ellipse 0.5 0.1 3 0 0"), InvalidArgument);
  CHECK_THROWS_AS(parse_boundary("PerturbedCircle 0.5 0.1"), InvalidArgument);
  CHECK_THROWS_AS(parse_boundary("PerturbedCircle 0.5 0.1 2.5 0 0"), InvalidArgument);
}

TEST_CASE("star boundary radius and derivative") {
  const ImplicitBoundary s{BoundaryKind::StarBoundary, 0.4, 0.1, 4, {0.0, 0.0}};
  for (double th = 0.0; th < 6.0; th += 0.37) {
    const double c = std::cos(4 * th);
    CHECK(s.radius(th) == doctest::Approx(0.4 + 0.1 * c * c * c));
    const double d = (s.radius(th + 1e-6) - s.radius(th - 1e-6)) / 2e-6;
    CHECK(s.radius_derivative(th) == doctest::Approx(d).epsilon(1e-7));
  }
}

TEST_CASE("edge cut sampling") {
  const auto b = circle(0.5);
  CHECK(sample_edge_cut(b, {0.0, 0.0}, {1.0, 0.0}, 0.01) == EdgeCut::Clean);
  CHECK(sample_edge_cut(b, {0.8, 0.0}, {1.0, 0.0}, 0.01) == EdgeCut::Clean);
  // A chord grazing the circle just inside its top dips in and out.
  CHECK(sample_edge_cut(b, {-0.1, 0.499}, {0.1, 0.499}, 0.01) == EdgeCut::Sliver);
  // A chord through the middle crosses twice with a large excursion.
  CHECK(sample_edge_cut(b, {-1.0, 0.0}, {1.0, 0.0}, 0.01) == EdgeCut::Violation);
}

TEST_CASE("provably far is conservative") {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto b = test_boundary_2();
  int used = 0;
  for (int i = 0; i < 2000; ++i) {
    const Point2 p0{u(gen), u(gen)};
    const Point2 p1 = p0 + Point2{0.05 * u(gen), 0.05 * u(gen)};
    const double l0 = level(b, p0), l1 = level(b, p1);
    if (!provably_far(b, l0, l1, norm(p1 - p0))) continue;
    ++used;
    for (int s = 0; s <= 50; ++s) CHECK((level(b, lerp(p0, p1, s / 50.0)) < 0.0) == (l0 < 0.0));
  }
  CHECK(used > 500);
}
