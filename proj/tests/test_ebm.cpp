#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "ebmfem/ebm.hpp"
#include "ebmfem/errors.hpp"

using namespace ebmfem;
using namespace ebmfem::ebm;

namespace {

ImplicitBoundary circle(double r0) {
  ImplicitBoundary b = test_boundary_1();
  b.r0 = r0;
  b.eps = 0.0;
  return b;
}

ImplicitBoundary circle_at(Point2 c, double r0) {
  ImplicitBoundary b = circle(r0);
  b.center = c;
  return b;
}

double shoelace(const std::vector<Point2>& p) {
  double a = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) a += cross(p[k], p[(k + 1) % p.size()]);
  return 0.5 * a;
}

bool inside_convex_ccw(const std::vector<Point2>& p, Point2 q) {
  for (std::size_t k = 0; k < p.size(); ++k)
    if (orient2(p[k], p[(k + 1) % p.size()], q) < -1e-14) return false;
  return true;
}

double apply(const StencilCoeffs& c, double h, double (*f)(double, double)) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) s += c[a][b] * f((a - 1) * h, (b - 1) * h);
  return s;
}

double row_entry(const sparse::CsrMatrix& m, std::size_t r, std::size_t c) {
  for (std::size_t p = m.row_ptr()[r]; p < m.row_ptr()[r + 1]; ++p)
    if (static_cast<std::size_t>(m.col()[p]) == c) return m.values()[p];
  return 0.0;
}

std::vector<double> sampled(const EbmGeometry& g, double (*phi)(Point2)) {
  std::vector<double> v(g.unknowns());
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::size_t cell = g.row_cell[r];
    v[r] = phi(g.grid.center(static_cast<int>(cell % g.grid.n), static_cast<int>(cell / g.grid.n)));
  }
  return v;
}

}  // namespace

TEST_CASE("classification by corner signs") {
  const auto b = circle(0.5);
  const auto g4 = CartesianGrid::make(4);
  const auto c4 = classify_cells(g4, b);
  CHECK(c4[g4.cell_index(2, 2)] == CellClass::Partial);
  CHECK(level(b, g4.vertex(2, 2)) < 0.0);
  CHECK(level(b, g4.vertex(3, 3)) > 0.0);

  const auto g8 = CartesianGrid::make(8);
  const auto c8 = classify_cells(g8, b);
  CHECK(c8[g8.cell_index(3, 3)] == CellClass::Internal);
  CHECK(c8[g8.cell_index(0, 0)] == CellClass::External);
  CHECK(c8[g8.cell_index(7, 4)] == CellClass::External);
}

TEST_CASE("classification matches the definition on test boundaries") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    const auto g = CartesianGrid::make(64);
    const auto cls = classify_cells(g, b);
    std::size_t rows = 0;
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i) {
        int in = 0;
        for (int k = 0; k < 4; ++k) in += level(b, g.vertex(i + k % 2, j + k / 2)) < 0.0;
        const auto c = cls[g.cell_index(i, j)];
        if (in == 4) CHECK(c != CellClass::External);
        if (in == 0) CHECK(c != CellClass::Internal);
        if (in > 0 && in < 4) CHECK(c == CellClass::Partial);
        rows += c != CellClass::External;
      }
    CHECK(build_geometry(g, b).unknowns() == rows);
  }
}

TEST_CASE("a grid too coarse for the boundary is rejected") {
  ImplicitBoundary b = test_boundary_2();
  b.eps = 0.25;
  CHECK_THROWS_AS(classify_cells(CartesianGrid::make(8), b), AssumptionViolation);
}

TEST_CASE("partial geometry: half-covered cell") {
  // Circle through (h/2, 0) and (h/2, h) bulging right; the chord is x = h/2.
  const auto g = CartesianGrid::make(8);
  const double h = g.h;
  const double d = 0.3;
  const auto b = circle_at({0.5 * h - d, 0.5 * h}, std::sqrt(d * d + 0.25 * h * h));
  const auto pg = partial_geometry(g, b, 4, 4);
  CHECK(pg.volume == doctest::Approx(0.5 * h * h).epsilon(1e-10));
  CHECK(pg.centroid.x == doctest::Approx(0.25 * h).epsilon(1e-9));
  CHECK(pg.centroid.y == doctest::Approx(0.5 * h).epsilon(1e-9));
  CHECK(pg.chord_length == doctest::Approx(h).epsilon(1e-10));
  CHECK(pg.chord_normal.x == doctest::Approx(1.0));
}

TEST_CASE("partial geometry: corner cut through edge midpoints") {
  const auto g = CartesianGrid::make(8);
  const double h = g.h;
  const auto b = circle(h * std::sqrt(1.25));
  const auto pg = partial_geometry(g, b, 4, 4);
  const std::vector<Point2> oracle{{0, 0}, {h, 0}, {h, 0.5 * h}, {0.5 * h, h}, {0, h}};
  CHECK(std::abs(shoelace(oracle) - (h * h - h * h / 8)) < 1e-15);
  CHECK(pg.volume == doctest::Approx(h * h - h * h / 8).epsilon(1e-10));
  CHECK(shoelace(pg.polygon) == doctest::Approx(pg.volume).epsilon(1e-12));
  CHECK(pg.chord_length == doctest::Approx(h / std::sqrt(2.0)).epsilon(1e-10));
  CHECK(pg.chord_normal.x == doctest::Approx(std::sqrt(0.5)));
  CHECK(pg.chord_normal.y == doctest::Approx(std::sqrt(0.5)));
  CHECK(inside_convex_ccw(pg.polygon, pg.centroid));
}

TEST_CASE("partial geometry: small cell grows to the clamp") {
  const auto g = CartesianGrid::make(8);
  const double h = g.h;
  const auto b = circle_at({-0.3, -0.3}, 0.3 * std::sqrt(2.0) + 0.005);
  const auto raw = partial_geometry(g, b, 4, 4, 0.0);
  REQUIRE(raw.volume < 0.01 * h * h);
  const auto pg = partial_geometry(g, b, 4, 4);
  CHECK(pg.volume >= 0.01 * h * h * (1 - 1e-9));
  CHECK(pg.volume == doctest::Approx(0.01 * h * h).epsilon(1e-6));
  CHECK(shoelace(pg.polygon) == doctest::Approx(pg.volume).epsilon(1e-12));
}

TEST_CASE("partial cells satisfy the closure identity and bounds") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    for (int n : {64, 128}) {
      const auto geom = build_geometry(CartesianGrid::make(n), b);
      const double h = geom.grid.h;
      REQUIRE(!geom.partial.empty());
      for (const auto& pg : geom.partial) {
        Vec2 s = pg.chord_length * pg.chord_normal;
        for (int f = 0; f < 4; ++f) {
          const Vec2 nrm = face_direction(f) == 0 ? Vec2{double(face_sign(f)), 0.0} : Vec2{0.0, double(face_sign(f))};
          if (pg.edges[f].cls != EdgeClass::External) s = s + pg.edges[f].length * nrm;
        }
        CHECK(norm(s) < 1e-12);
        CHECK(pg.volume > 0.0);
        CHECK(pg.volume <= h * h * (1 + 1e-12));
        CHECK(pg.volume >= 0.01 * h * h * (1 - 1e-9));
        CHECK(inside_convex_ccw(pg.polygon, pg.centroid));
      }
    }
  }
}

TEST_CASE("stencil examples") {
  const auto c0 = flux_stencil(0, {0.5, 0.0}, 1.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double want = (a == 1 && b == 1) ? -1.0 : (a == 2 && b == 1) ? 1.0 : 0.0;
      CHECK(c0[a][b] == want);
    }
  const auto c1 = flux_stencil(0, {0.5, 0.25}, 1.0);
  CHECK(c1[1][1] == doctest::Approx(-0.75));
  CHECK(c1[2][1] == doctest::Approx(0.75));
  CHECK(c1[1][2] == doctest::Approx(-0.25));
  CHECK(c1[2][2] == doctest::Approx(0.25));
  CHECK_THROWS_AS(flux_stencil(0, {0.5, 0.6}, 1.0), InvalidArgument);
}

TEST_CASE("stencils annihilate constants and are exact on linear fields") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 200; ++k) {
    const double h = 0.1 + (u(rng) + 0.5);
    const int d = k % 2;
    const Vec2 r{u(rng) * h, u(rng) * h};
    const auto c = flux_stencil(d, r, h);
    // Flux through the face whose outward normal is sign(r_d) e_d.
    const double sd = (d == 0 ? r.x : r.y) >= 0.0 ? 1.0 : -1.0;
    double sum = 0.0;
    for (const auto& row : c)
      for (double v : row) sum += v;
    CHECK(std::abs(sum) < 1e-12 / h);
    CHECK(apply(c, h, [](double x, double) { return x; }) == doctest::Approx(d == 0 ? sd : 0.0));
    CHECK(apply(c, h, [](double, double y) { return y; }) == doctest::Approx(d == 1 ? sd : 0.0));
  }
}

TEST_CASE("internal rows are the five-point Laplacian") {
  const auto geom = build_geometry(CartesianGrid::make(4), std::nullopt);
  const auto sys = assemble_ebm(geom, linear_field(1.0, 1.0));
  const double h = geom.grid.h;
  for (auto [i, j] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 2}, std::pair{2, 2}}) {
    const auto r = static_cast<std::size_t>(geom.row[geom.grid.cell_index(i, j)]);
    if (r == sys.pinned_row) continue;
    CHECK(row_entry(sys.matrix, r, r) == doctest::Approx(-4.0 / (h * h)));
    for (auto [di, dj] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}})
      CHECK(row_entry(sys.matrix, r, static_cast<std::size_t>(geom.row[geom.grid.cell_index(i + di, j + dj)])) ==
            doctest::Approx(1.0 / (h * h)));
  }
}

TEST_CASE("every non-pinned row annihilates constants") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    const auto geom = build_geometry(CartesianGrid::make(64), b);
    const auto sys = assemble_ebm(geom, manufactured_field());
    const std::vector<double> ones(geom.unknowns(), 1.0);
    std::vector<double> y(ones.size());
    sys.matrix.multiply(ones, y);
    double scale = 0.0;
    for (double v : sys.matrix.values()) scale = std::max(scale, std::abs(v));
    for (std::size_t r = 0; r < y.size(); ++r)
      if (r != sys.pinned_row) CHECK(std::abs(y[r]) < 1e-12 * scale);
  }
}

TEST_CASE("patch test on the box") {
  const auto geom = build_geometry(CartesianGrid::make(16), std::nullopt);
  const auto exact = linear_field(1.0, 1.0);
  const auto run = solve_ebm(geom, exact, 1e-13);
  for (std::size_t r = 0; r < geom.unknowns(); ++r) {
    const std::size_t cell = geom.row_cell[r];
    const Point2 c = geom.grid.center(static_cast<int>(cell % 16), static_cast<int>(cell / 16));
    CHECK(run.solution.potential[r] == doctest::Approx(exact.phi(c)).epsilon(1e-9));
    CHECK(std::abs(run.solution.grad[r].x - 1.0) < 1e-10);
    CHECK(std::abs(run.solution.grad[r].y - 1.0) < 1e-10);
  }
}

TEST_CASE("gradient recovery is exact on quadratics") {
  // Centered differences, one-sided quadrics and the boundary line
  // extrapolation all reproduce quadratic potentials.
  auto phi = [](Point2 p) { return p.x * p.x + 3.0 * p.x * p.y - p.y * p.y + 2.0 * p.y; };
  auto grad = [](Point2 p) { return Vec2{2.0 * p.x + 3.0 * p.y, 3.0 * p.x - 2.0 * p.y + 2.0}; };
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    const auto geom = build_geometry(CartesianGrid::make(64), b);
    const auto sol = recover_gradients(geom, sampled(geom, +phi));
    for (std::size_t r = 0; r < geom.unknowns(); ++r) {
      const std::size_t cell = geom.row_cell[r];
      const Vec2 want = grad(geom.grid.center(static_cast<int>(cell % 64), static_cast<int>(cell / 64)));
      CHECK(norm(sol.grad[r] - want) < 1e-9);
    }
    REQUIRE(sol.boundary.size() == geom.partial.size());
    for (const auto& bg : sol.boundary) CHECK(norm(bg.grad - grad(bg.point)) < 1e-8);
  }
}

TEST_CASE("one-sided quadric derivative") {
  // phi = x^2 on a line whose left neighbour is missing: the quadric through
  // {0, h, 2h} has derivative 0 at 0.
  const auto b = circle(0.45);
  const auto geom = build_geometry(CartesianGrid::make(32), b);
  const auto sol = recover_gradients(geom, sampled(geom, [](Point2 p) { return p.x * p.x; }));
  int one_sided = 0;
  for (std::size_t r = 0; r < geom.unknowns(); ++r) {
    const std::size_t cell = geom.row_cell[r];
    const int i = static_cast<int>(cell % 32), j = static_cast<int>(cell / 32);
    if (geom.has_row(i - 1, j) && geom.has_row(i + 1, j)) continue;
    ++one_sided;
    CHECK(sol.grad[r].x == doctest::Approx(2.0 * geom.grid.center(i, j).x).epsilon(1e-9));
  }
  CHECK(one_sided > 0);
}

TEST_CASE("manufactured problem on test 1 at n=64") {
  const auto geom = build_geometry(CartesianGrid::make(64), test_boundary_1());
  CHECK(std::abs(static_cast<double>(geom.unknowns()) - 861.0) <= 0.05 * 861.0);
  const auto run = solve_ebm(geom, manufactured_field());
  CHECK(run.report.converged);
  CHECK(run.report.relative_residual <= 1e-9);
  const auto ex = manufactured_field();
  double worst = 0.0;
  for (const auto& bg : run.solution.boundary) worst = std::max(worst, norm(bg.grad - ex.grad(bg.point)));
  CHECK(worst < 1e-2);
}

TEST_CASE("grid file lists every cell") {
  const auto geom = build_geometry(CartesianGrid::make(16), test_boundary_1());
  const auto run = solve_ebm(geom, manufactured_field());
  std::ostringstream os;
  write_grid_file(os, geom, run.solution);
  std::istringstream is(os.str());
  std::string line;
  int count = 0;
  while (std::getline(is, line)) ++count;
  CHECK(count == 16 * 16);
}
