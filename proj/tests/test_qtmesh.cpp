#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <doctest.h>

#include "ebmfem/errors.hpp"
#include "ebmfem/qtmesh.hpp"

using namespace ebmfem;
using namespace ebmfem::qt;

namespace {

struct Box {
  double x0, y0, x1, y1;
};

Box box(const Quadtree& t, const Quadrant& q) {
  const Point2 c = t.lower_corner(q);
  const double s = Quadtree::size(q.level);
  return {c.x, c.y, c.x + s, c.y + s};
}

// Leaves sharing a side segment of positive length.
bool edge_adjacent(const Box& a, const Box& b) {
  const double tol = 1e-14;
  const bool vertical = (std::abs(a.x1 - b.x0) < tol || std::abs(b.x1 - a.x0) < tol) &&
                        std::min(a.y1, b.y1) - std::max(a.y0, b.y0) > tol;
  const bool horizontal = (std::abs(a.y1 - b.y0) < tol || std::abs(b.y1 - a.y0) < tol) &&
                          std::min(a.x1, b.x1) - std::max(a.x0, b.x0) > tol;
  return vertical || horizontal;
}

int brute_force_jump(const Quadtree& t) {
  const auto leaves = t.leaves();
  int worst = 0;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      const auto& a = t.node(leaves[i]);
      const auto& b = t.node(leaves[j]);
      if (edge_adjacent(box(t, a), box(t, b))) worst = std::max(worst, std::abs(a.level - b.level));
    }
  return worst;
}

void check_conforming(const TriMesh& m) {
  std::map<std::pair<int, int>, int> incidence;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>((k + 1) % 3)], b = t[static_cast<std::size_t>((k + 2) % 3)];
      ++incidence[{std::min(a, b), std::max(a, b)}];
    }
  std::size_t boundary_edges = 0;
  for (const auto& [e, n] : incidence) {
    CHECK(n >= 1);
    CHECK(n <= 2);
    if (n == 1) {
      ++boundary_edges;
      CHECK(m.boundary_vertex[static_cast<std::size_t>(e.first)]);
      CHECK(m.boundary_vertex[static_cast<std::size_t>(e.second)]);
    }
  }
  CHECK(incidence.size() == m.edges.size());
  std::size_t open = 0;
  for (std::size_t e = 0; e < m.edges.size(); ++e) open += m.is_boundary_edge(static_cast<int>(e));
  CHECK(open == boundary_edges);
  CHECK(m.interior_edge_count() == m.edges.size() - boundary_edges);
}

double min_area(const TriMesh& m) {
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < m.triangles.size(); ++t) a = std::min(a, m.signed_area(static_cast<int>(t)));
  return a;
}

double total_area(const TriMesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) a += m.signed_area(static_cast<int>(t));
  return a;
}

Point2 centroid(const TriMesh& m, int t) {
  const auto& tri = m.triangles[static_cast<std::size_t>(t)];
  return (1.0 / 3.0) * (m.vertices[static_cast<std::size_t>(tri[0])] + m.vertices[static_cast<std::size_t>(tri[1])] +
                        m.vertices[static_cast<std::size_t>(tri[2])]);
}

bool contains(const TriMesh& m, int t, Point2 p) {
  const auto l = m.barycentric(t, p);
  return l[0] >= -1e-10 && l[1] >= -1e-10 && l[2] >= -1e-10;
}

bool hanging_side(const Quadtree& t, const Quadrant& q, int dx, int dy) {
  const int nb = t.find(q.level, q.ix + dx, q.iy + dy);
  return nb >= 0 && !t.node(nb).is_leaf();
}

int corner_inside_count(const Quadtree& t, const Quadrant& q, const ImplicitBoundary& b, std::array<bool, 4>& in) {
  const Box bx = box(t, q);
  const std::array<Point2, 4> c{{{bx.x0, bx.y0}, {bx.x1, bx.y0}, {bx.x1, bx.y1}, {bx.x0, bx.y1}}};
  int n = 0;
  for (int k = 0; k < 4; ++k) n += in[static_cast<std::size_t>(k)] = level(b, c[static_cast<std::size_t>(k)]) < 0.0;
  return n;
}

}  // namespace

TEST_CASE("uniform tree") {
  const auto t = Quadtree::uniform(3);
  const auto leaves = t.leaves();
  CHECK(leaves.size() == 64);
  for (int id : leaves) CHECK(t.node(id).level == 3);
  CHECK(Quadtree::build(test_boundary_1(), 3, 3).leaves().size() == 64);
}

TEST_CASE("boundary leaves reach the maximum level and the tree is balanced") {
  const auto b = test_boundary_2();
  const auto t = Quadtree::build(b, 6, 9);
  std::size_t cut = 0;
  for (int id : t.leaves()) {
    const auto& q = t.node(id);
    CHECK(q.level >= 6);
    std::array<bool, 4> in{};
    const int n = corner_inside_count(t, q, b, in);
    if (n > 0 && n < 4) {
      ++cut;
      CHECK(q.level == 9);
    }
  }
  CHECK(cut > 0);
  CHECK(t.max_neighbor_level_jump() <= 1);
}

TEST_CASE("balance agrees with an exhaustive neighbour scan") {
  for (auto [lo, hi] : {std::pair{2, 6}, std::pair{3, 7}}) {
    const auto t = Quadtree::build(test_boundary_2(), lo, hi);
    CHECK(brute_force_jump(t) <= 1);
    CHECK(brute_force_jump(t) == t.max_neighbor_level_jump());
  }
  // An unbalanced tree is detected and repaired.
  auto t = Quadtree::uniform(1);
  int id = t.leaves()[0];
  for (int k = 0; k < 3; ++k) {
    t.split(id);
    id = t.node(id).child[3];
  }
  CHECK(brute_force_jump(t) == 3);
  CHECK(t.max_neighbor_level_jump() == 3);
  t.balance();
  CHECK(brute_force_jump(t) <= 1);
}

TEST_CASE("find_leaf returns the containing leaf") {
  const auto t = Quadtree::build(test_boundary_1(), 3, 7);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Point2 p{u(rng), u(rng)};
    const int id = t.find_leaf(p);
    REQUIRE(id >= 0);
    const Box bx = box(t, t.node(id));
    CHECK(t.node(id).is_leaf());
    CHECK((p.x >= bx.x0 && p.x <= bx.x1 && p.y >= bx.y0 && p.y <= bx.y1));
  }
  CHECK(t.find_leaf({1.5, 0.0}) == -1);
}

TEST_CASE("full leaves: two triangles, or a center fan with hanging nodes") {
  const auto b = test_boundary_1();
  auto tree = Quadtree::build(b, 3, 6);
  MeshBuilder mb(tree, b);
  mb.triangulate_full();
  std::size_t plain = 0, hanging = 0;
  for (int id : tree.leaves()) {
    const auto& q = tree.node(id);
    if (q.level == tree.max_level() || level(b, tree.center(q)) >= 0.0) continue;
    int h = 0;
    for (auto [dx, dy] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}})
      h += hanging_side(tree, q, dx, dy);
    CHECK(q.triangle_count == (h == 0 ? 2 : 4 + h));
    (h == 0 ? plain : hanging) += 1;
  }
  CHECK(plain > 0);
  CHECK(hanging > 0);
  const auto m = mb.mesh();
  CHECK(mb.full_leaf_count() >= plain + hanging);
  CHECK(min_area(m) > 0.0);
  // Interior edges of the partial mesh are shared by exactly two triangles.
  std::map<std::pair<int, int>, int> inc;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)], c = t[static_cast<std::size_t>((k + 1) % 3)];
      ++inc[{std::min(a, c), std::max(a, c)}];
    }
  for (const auto& [e, n] : inc) CHECK(n <= 2);
}

TEST_CASE("marching-squares cases") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    auto tree = Quadtree::build(b, 4, 7);
    MeshBuilder mb(tree, b);
    mb.triangulate_full();
    mb.recover_boundary();
    std::size_t one = 0, two = 0;
    for (int id : tree.leaves()) {
      const auto& q = tree.node(id);
      if (q.level != tree.max_level()) continue;
      std::array<bool, 4> in{};
      const int n = corner_inside_count(tree, q, b, in);
      if (n == 1) {
        CHECK(q.triangle_count == 1);
        ++one;
      }
      const bool adjacent = (in[0] && in[1]) || (in[1] && in[2]) || (in[2] && in[3]) || (in[3] && in[0]);
      if (n == 2 && adjacent) {
        CHECK(q.triangle_count == 2);
        ++two;
      }
    }
    CHECK(one > 0);
    CHECK(two > 0);
    CHECK(mb.partial_leaf_count() > 0);
  }
}

TEST_CASE("generated meshes are conforming, oriented and fit the curve") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    for (auto [lo, hi] : {std::pair{5, 5}, std::pair{6, 6}, std::pair{4, 8}}) {
      const auto r = generate_mesh(b, lo, hi);
      const auto& m = r.mesh;
      check_conforming(m);
      CHECK(min_area(m) > 0.0);
      for (std::size_t v = 0; v < m.vertices.size(); ++v)
        if (m.boundary_vertex[v]) CHECK(std::abs(level(b, m.vertices[v])) <= 1e-12);
      CHECK(r.tree.max_neighbor_level_jump() <= 1);
    }
  }
}

TEST_CASE("mesh area matches a Monte Carlo estimate") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    const auto r = generate_mesh(b, 7, 7);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int samples = 1000000;
    int hits = 0;
    for (int k = 0; k < samples; ++k) hits += level(b, {u(rng), u(rng)}) < 0.0;
    const double mc = 4.0 * hits / samples;
    CHECK(std::abs(total_area(r.mesh) - mc) <= 0.01 * mc);
  }
  // Perturbed circle area is pi (r0^2 + eps^2 / 2).
  const auto b1 = test_boundary_1();
  const double exact = M_PI * (b1.r0 * b1.r0 + 0.5 * b1.eps * b1.eps);
  CHECK(std::abs(total_area(generate_mesh(b1, 8, 8).mesh) - exact) < 1e-3 * exact);
}

TEST_CASE("postprocess is a fixed point on projected meshes") {
  const auto b = test_boundary_2();
  auto r = generate_mesh(b, 5, 7);
  const auto before = r.mesh.vertices;
  postprocess(r.mesh, b);
  for (std::size_t v = 0; v < before.size(); ++v) {
    CHECK(std::abs(r.mesh.vertices[v].x - before[v].x) <= 1e-15);
    CHECK(std::abs(r.mesh.vertices[v].y - before[v].y) <= 1e-15);
  }
}

TEST_CASE("postprocess rejects inverted elements") {
  TriMesh m;
  m.vertices = {{0.0, 0.0}, {0.1, 0.0}, {0.0, 0.1}};
  m.boundary_vertex = {0, 1, 0};
  m.triangles = {{0, 1, 2}};
  m.build_topology();
  ImplicitBoundary b = test_boundary_1();
  b.eps = 0.0;
  b.r0 = 0.5;
  b.center = {0.3, 0.0};
  // Vertex 1 moves radially to (-0.2, 0), flipping the triangle.
  CHECK_THROWS_AS(postprocess(m, b), InvertedElement);
}

TEST_CASE("point location agrees with the brute-force scan") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    const auto r = generate_mesh(b, 5, 8);
    const auto& m = r.mesh;
    for (std::size_t t = 0; t < m.triangles.size(); t += 7)
      CHECK(point_locate(m, r.tree, centroid(m, static_cast<int>(t))) == static_cast<int>(t));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int inside = 0;
    for (int k = 0; k < 10000; ++k) {
      const Point2 p{u(rng), u(rng)};
      const int brute = locate_brute_force(m, p);
      if (brute < 0) {
        CHECK_THROWS_AS(point_locate(m, r.tree, p), OutsideDomain);
        CHECK_FALSE(locate_or_nearest(m, r.tree, p).inside);
        continue;
      }
      ++inside;
      const int t = point_locate(m, r.tree, p);
      if (t != brute) CHECK(contains(m, t, p));
      const auto loc = locate_or_nearest(m, r.tree, p);
      CHECK(loc.inside);
      CHECK(contains(m, loc.triangle, p));
    }
    CHECK(inside > 1000);
  }
}

TEST_CASE("points on shared edges locate to either neighbour") {
  const auto r = generate_mesh(test_boundary_1(), 5, 5);
  const auto& m = r.mesh;
  for (std::size_t e = 0; e < m.edges.size(); e += 5) {
    const auto& ed = m.edges[e];
    if (ed.left < 0 || ed.right < 0) continue;
    const Point2 mid = 0.5 * (m.vertices[static_cast<std::size_t>(ed.v0)] + m.vertices[static_cast<std::size_t>(ed.v1)]);
    const int t = point_locate(m, r.tree, mid);
    CHECK((t == ed.left || t == ed.right));
  }
}

TEST_CASE("mesh text round trip is bit exact") {
  const auto r = generate_mesh(test_boundary_2(), 4, 6);
  std::ostringstream a;
  write_mesh(a, r.mesh);
  std::istringstream in(a.str());
  const TriMesh back = read_mesh(in);
  REQUIRE(back.vertices.size() == r.mesh.vertices.size());
  for (std::size_t v = 0; v < back.vertices.size(); ++v) {
    CHECK(back.vertices[v] == r.mesh.vertices[v]);
    CHECK(back.boundary_vertex[v] == r.mesh.boundary_vertex[v]);
  }
  CHECK(back.triangles == r.mesh.triangles);
  std::ostringstream b;
  write_mesh(b, back);
  CHECK(a.str() == b.str());

  std::istringstream bad("3 1 3\n0 0 0\n1 0 0\n");
  CHECK_THROWS(read_mesh(bad));
}
