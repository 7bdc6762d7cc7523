#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "ebmfem/errors.hpp"
#include "ebmfem/qtmesh.hpp"

namespace ebmfem::qt {

namespace {

// Crossings closer than this (in segment parameter) to a lattice vertex
// are merged into it.
constexpr double kMergeParam = 1e-10;
// Largest excursion area, relative to the sub-edge length squared, that
// may be dropped when a sub-edge shows two sign changes.
constexpr double kSliverFraction = 0.01;

std::uint64_t edge_key(std::uint64_t a, std::uint64_t b) { return (a << 32) | b; }

}  // namespace

// ---------------------------------------------------------------- TriMesh

void TriMesh::build_topology() {
  edges.clear();
  triangle_edges.assign(triangles.size(), {-1, -1, -1});
  neighbors.assign(triangles.size(), {-1, -1, -1});
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(triangles.size() * 2);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int a = triangles[t][static_cast<std::size_t>((k + 1) % 3)];
      const int b = triangles[t][static_cast<std::size_t>((k + 2) % 3)];
      const int lo = std::min(a, b), hi = std::max(a, b);
      const std::uint64_t key = edge_key(static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi));
      auto [it, fresh] = index.emplace(key, static_cast<int>(edges.size()));
      if (fresh) edges.push_back({lo, hi, -1, -1});
      MeshEdge& e = edges[static_cast<std::size_t>(it->second)];
      int& slot = a < b ? e.left : e.right;
      if (slot >= 0)
        throw GeometryDegenerate("edge " + std::to_string(lo) + "-" + std::to_string(hi) +
                                 " has two triangles on the same side");
      slot = static_cast<int>(t);
      triangle_edges[t][static_cast<std::size_t>(k)] = it->second;
    }
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const MeshEdge& e = edges[static_cast<std::size_t>(triangle_edges[t][static_cast<std::size_t>(k)])];
      neighbors[t][static_cast<std::size_t>(k)] = e.left == static_cast<int>(t) ? e.right : e.left;
    }
  }
}

double TriMesh::signed_area(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  return 0.5 * orient2(vertices[static_cast<std::size_t>(tri[0])], vertices[static_cast<std::size_t>(tri[1])],
                       vertices[static_cast<std::size_t>(tri[2])]);
}

std::size_t TriMesh::interior_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const MeshEdge& e) { return e.left >= 0 && e.right >= 0; }));
}

std::array<double, 3> TriMesh::barycentric(int t, Point2 p) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  const Point2 a = vertices[static_cast<std::size_t>(tri[0])];
  const Point2 b = vertices[static_cast<std::size_t>(tri[1])];
  const Point2 c = vertices[static_cast<std::size_t>(tri[2])];
  const double d = orient2(a, b, c);
  return {orient2(p, b, c) / d, orient2(a, p, c) / d, orient2(a, b, p) / d};
}

// ------------------------------------------------------------ MeshBuilder

MeshBuilder::MeshBuilder(Quadtree& tree, const ImplicitBoundary& boundary)
    : tree_(tree), boundary_(boundary), lattice_(std::int64_t{1} << tree.max_level()) {
  boundary_.validate();
  done_.assign(tree_.nodes().size(), 0);
  for (std::size_t i = 0; i < tree_.nodes().size(); ++i) {
    tree_.node(static_cast<int>(i)).first_triangle = -1;
    tree_.node(static_cast<int>(i)).triangle_count = 0;
  }
}

Point2 MeshBuilder::lattice_point(std::uint64_t key) const {
  const auto n = static_cast<std::uint64_t>(lattice_ + 1);
  const double h = 2.0 / static_cast<double>(lattice_);
  return {-1.0 + h * static_cast<double>(key / n), -1.0 + h * static_cast<double>(key % n)};
}

double MeshBuilder::lattice_level(std::uint64_t key) {
  auto it = lattice_level_.find(key);
  if (it != lattice_level_.end()) return it->second;
  const double l = level(boundary_, lattice_point(key));
  lattice_level_.emplace(key, l);
  return l;
}

int MeshBuilder::new_vertex(Point2 p, bool on_boundary) {
  vertices_.push_back(p);
  on_boundary_.push_back(on_boundary ? 1 : 0);
  return static_cast<int>(vertices_.size()) - 1;
}

int MeshBuilder::lattice_vertex(std::uint64_t key) {
  auto it = lattice_index_.find(key);
  if (it != lattice_index_.end()) return it->second;
  const int v = new_vertex(lattice_point(key), false);
  lattice_index_.emplace(key, v);
  return v;
}

int MeshBuilder::crossing_vertex(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t lo = std::min(a, b), hi = std::max(a, b);
  const std::uint64_t key = edge_key(lo, hi);
  auto it = crossing_index_.find(key);
  if (it != crossing_index_.end()) return it->second;

  const Point2 p0 = lattice_point(lo), p1 = lattice_point(hi);
  const double l0 = lattice_level(lo), l1 = lattice_level(hi);
  const double len = norm(p1 - p0);
  int v = -1;
  if (!provably_far(boundary_, l0, l1, len) &&
      sample_edge_cut(boundary_, p0, p1, kSliverFraction) == EdgeCut::Violation)
    throw AssumptionViolation("boundary crosses a quadrant edge more than once; raise max_level");
  if ((l0 < 0.0) != (l1 < 0.0)) {
    const double t = *segment_intersection_param(boundary_, p0, p1);
    if (t < kMergeParam) {
      v = lattice_vertex(lo);
      on_boundary_[static_cast<std::size_t>(v)] = 1;
    } else if (t > 1.0 - kMergeParam) {
      v = lattice_vertex(hi);
      on_boundary_[static_cast<std::size_t>(v)] = 1;
    } else {
      v = new_vertex(lerp(p0, p1, t), true);
    }
  }
  crossing_index_.emplace(key, v);
  return v;
}

MeshBuilder::LeafCycle MeshBuilder::cycle(const Quadrant& q) const {
  const std::int64_t s = lattice_ >> q.level;
  const std::int64_t x0 = q.ix * s, y0 = q.iy * s;
  const auto n = lattice_ + 1;
  auto key = [n](std::int64_t x, std::int64_t y) { return static_cast<std::uint64_t>(x * n + y); };
  auto finer = [&](std::int64_t dx, std::int64_t dy) {
    const int nb = tree_.find(q.level, q.ix + dx, q.iy + dy);
    return nb >= 0 && !tree_.node(nb).is_leaf();
  };
  LeafCycle c;
  const std::int64_t hs = s / 2;
  c.keys.push_back(key(x0, y0));
  if (finer(0, -1)) c.keys.push_back(key(x0 + hs, y0)), c.hanging = true;
  c.keys.push_back(key(x0 + s, y0));
  if (finer(1, 0)) c.keys.push_back(key(x0 + s, y0 + hs)), c.hanging = true;
  c.keys.push_back(key(x0 + s, y0 + s));
  if (finer(0, 1)) c.keys.push_back(key(x0 + hs, y0 + s)), c.hanging = true;
  c.keys.push_back(key(x0, y0 + s));
  if (finer(-1, 0)) c.keys.push_back(key(x0, y0 + hs)), c.hanging = true;
  return c;
}

void MeshBuilder::add_triangle(int leaf, int a, int b, int c) {
  Quadrant& q = tree_.node(leaf);
  if (q.first_triangle < 0) q.first_triangle = static_cast<int>(triangles_.size());
  ++q.triangle_count;
  triangles_.push_back({a, b, c});
}

void MeshBuilder::triangulate_polygon(int leaf, const std::vector<int>& poly_in, bool fan_from_centroid) {
  std::vector<int> poly;
  for (int v : poly_in)
    if (poly.empty() || poly.back() != v) poly.push_back(v);
  while (poly.size() > 1 && poly.front() == poly.back()) poly.pop_back();
  const std::size_t m = poly.size();
  if (m < 3) return;
  auto P = [&](std::size_t i) { return vertices_[static_cast<std::size_t>(poly[i % m])]; };
  auto area = [&](std::size_t i, std::size_t j, std::size_t k) { return orient2(P(i), P(j), P(k)); };
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, norm(P(i + 1) - P(i)));
  const double tiny = 1e-12 * scale * scale;

  if (!fan_from_centroid && m == 3) {
    if (area(0, 1, 2) > tiny) {
      add_triangle(leaf, poly[0], poly[1], poly[2]);
      return;
    }
  }
  if (!fan_from_centroid && m == 4) {
    auto min_angle_sine = [&](std::size_t i, std::size_t j, std::size_t k) {
      const double a2 = area(i, j, k);
      const double lij = norm(P(j) - P(i)), ljk = norm(P(k) - P(j)), lki = norm(P(i) - P(k));
      const double lmax = std::max({lij, ljk, lki});
      return a2 <= tiny ? -1.0 : a2 * lmax / (lij * ljk * lki);
    };
    const double q0 = std::min(min_angle_sine(0, 1, 2), min_angle_sine(0, 2, 3));
    const double q1 = std::min(min_angle_sine(1, 2, 3), min_angle_sine(1, 3, 0));
    if (std::max(q0, q1) > 0.0) {
      if (q0 >= q1) {
        add_triangle(leaf, poly[0], poly[1], poly[2]);
        add_triangle(leaf, poly[0], poly[2], poly[3]);
      } else {
        add_triangle(leaf, poly[1], poly[2], poly[3]);
        add_triangle(leaf, poly[1], poly[3], poly[0]);
      }
      return;
    }
  }
  Point2 c{};
  for (std::size_t i = 0; i < m; ++i) c = c + P(i);
  c = (1.0 / static_cast<double>(m)) * c;
  const int cv = new_vertex(c, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (orient2(c, P(i), P(i + 1)) <= 0.0)
      throw GeometryDegenerate("cut quadrant polygon is not star-shaped about its centroid");
    add_triangle(leaf, cv, poly[i], poly[(i + 1) % m]);
  }
}

void MeshBuilder::triangulate_full() {
  for (int id : tree_.leaves()) {
    if (done_[static_cast<std::size_t>(id)]) continue;
    const Quadrant q = tree_.node(id);
    const LeafCycle c = cycle(q);
    bool all_inside = true;
    for (std::size_t i = 0; i < c.keys.size() && all_inside; ++i) {
      if (lattice_level(c.keys[i]) >= 0.0) all_inside = false;
      else if (crossing_vertex(c.keys[i], c.keys[(i + 1) % c.keys.size()]) >= 0) all_inside = false;
    }
    if (!all_inside) continue;
    done_[static_cast<std::size_t>(id)] = 1;
    ++full_leaves_;
    if (!c.hanging) {
      const int v0 = lattice_vertex(c.keys[0]), v1 = lattice_vertex(c.keys[1]);
      const int v2 = lattice_vertex(c.keys[2]), v3 = lattice_vertex(c.keys[3]);
      add_triangle(id, v0, v1, v2);
      add_triangle(id, v0, v2, v3);
      continue;
    }
    const std::int64_t s = lattice_ >> q.level;
    const auto center = static_cast<std::uint64_t>((q.ix * s + s / 2) * (lattice_ + 1) + q.iy * s + s / 2);
    const int cv = lattice_vertex(center);
    for (std::size_t i = 0; i < c.keys.size(); ++i)
      add_triangle(id, cv, lattice_vertex(c.keys[i]), lattice_vertex(c.keys[(i + 1) % c.keys.size()]));
  }
}

void MeshBuilder::recover_boundary() {
  for (int id : tree_.leaves()) {
    if (done_[static_cast<std::size_t>(id)]) continue;
    done_[static_cast<std::size_t>(id)] = 1;
    const Quadrant q = tree_.node(id);
    const LeafCycle c = cycle(q);
    const std::size_t m = c.keys.size();
    std::vector<char> inside(m);
    std::vector<int> cross(m);
    int ncross = 0;
    bool any_inside = false;
    for (std::size_t i = 0; i < m; ++i) {
      inside[i] = lattice_level(c.keys[i]) < 0.0;
      any_inside = any_inside || inside[i];
      cross[i] = crossing_vertex(c.keys[i], c.keys[(i + 1) % m]);
      if (cross[i] >= 0) ++ncross;
    }
    if (ncross == 0) {
      if (any_inside)
        throw GeometryDegenerate("uncut quadrant with inside corners left after full triangulation");
      continue;
    }
    ++partial_leaves_;

    bool connected = ncross == 2;
    if (!connected) {
      const double lc = level(boundary_, tree_.center(q));
      if (lc == 0.0)
        throw AmbiguousTopology("saddle quadrant with the boundary through its center; refine");
      connected = lc < 0.0;
    }
    if (connected) {
      std::vector<int> poly;
      for (std::size_t i = 0; i < m; ++i) {
        if (inside[i]) poly.push_back(lattice_vertex(c.keys[i]));
        if (cross[i] >= 0) poly.push_back(cross[i]);
      }
      triangulate_polygon(id, poly, c.hanging);
      continue;
    }
    // Separate inside pieces: one polygon per run of inside cycle vertices.
    for (std::size_t start = 0; start < m; ++start) {
      const std::size_t prev = (start + m - 1) % m;
      if (!inside[start] || inside[prev]) continue;
      std::vector<int> poly{cross[prev]};
      std::size_t i = start;
      while (inside[i]) {
        poly.push_back(lattice_vertex(c.keys[i]));
        if (cross[i] >= 0) break;
        i = (i + 1) % m;
      }
      poly.push_back(cross[i]);
      triangulate_polygon(id, poly, c.hanging);
    }
  }
}

TriMesh MeshBuilder::mesh() const {
  TriMesh out;
  std::vector<int> remap(vertices_.size(), -1);
  for (const auto& t : triangles_)
    for (int v : t) remap[static_cast<std::size_t>(v)] = 0;
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (remap[v] < 0) continue;
    remap[v] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(vertices_[v]);
    out.boundary_vertex.push_back(on_boundary_[v]);
  }
  out.triangles.reserve(triangles_.size());
  for (const auto& t : triangles_)
    out.triangles.push_back({remap[static_cast<std::size_t>(t[0])], remap[static_cast<std::size_t>(t[1])],
                             remap[static_cast<std::size_t>(t[2])]});
  out.build_topology();
  return out;
}

void postprocess(TriMesh& mesh, const ImplicitBoundary& boundary) {
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    if (mesh.boundary_vertex[v]) mesh.vertices[v] = project_to_boundary(boundary, mesh.vertices[v]);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    if (!(mesh.signed_area(static_cast<int>(t)) > 0.0))
      throw InvertedElement("triangle " + std::to_string(t) + " inverted by boundary projection; refine");
}

MeshResult generate_mesh(const ImplicitBoundary& boundary, int min_level, int max_level) {
  Quadtree tree = Quadtree::build(boundary, min_level, max_level);
  TriMesh mesh;
  {
    MeshBuilder builder(tree, boundary);
    builder.triangulate_full();
    builder.recover_boundary();
    mesh = builder.mesh();
  }
  postprocess(mesh, boundary);
  return {std::move(tree), std::move(mesh)};
}

// --------------------------------------------------------------- locator

namespace {

bool contains(const TriMesh& mesh, int t, Point2 p) {
  const auto l = mesh.barycentric(t, p);
  return l[0] >= -kBarycentricTol && l[1] >= -kBarycentricTol && l[2] >= -kBarycentricTol;
}

struct WalkResult {
  int triangle;
  bool found;
};

// Moves across the edge with the most negative barycentric coordinate.
// Stops when p is reached, a boundary edge blocks the way, or the step
// budget (one visit per triangle) runs out.
WalkResult walk(const TriMesh& mesh, int start, Point2 p) {
  int t = start;
  const std::size_t budget = mesh.triangles.size();
  for (std::size_t step = 0; step <= budget; ++step) {
    const auto l = mesh.barycentric(t, p);
    const auto k = static_cast<std::size_t>(std::min_element(l.begin(), l.end()) - l.begin());
    if (l[k] >= -kBarycentricTol) return {t, true};
    const int nb = mesh.neighbors[static_cast<std::size_t>(t)][k];
    if (nb < 0) return {t, false};
    t = nb;
  }
  return {t, false};
}

int scan_leaf(const TriMesh& mesh, const Quadrant& q, Point2 p) {
  for (int t = q.first_triangle; t >= 0 && t < q.first_triangle + q.triangle_count; ++t)
    if (contains(mesh, t, p)) return t;
  return -1;
}

}  // namespace

int locate_brute_force(const TriMesh& mesh, Point2 p) {
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    if (contains(mesh, static_cast<int>(t), p)) return static_cast<int>(t);
  return -1;
}

int point_locate(const TriMesh& mesh, const Quadtree& tree, Point2 p) {
  const int leaf = tree.find_leaf(p);
  if (leaf >= 0) {
    const Quadrant& q = tree.node(leaf);
    if (q.first_triangle >= 0) {
      const WalkResult w = walk(mesh, q.first_triangle, p);
      if (w.found) return w.triangle;
      const int t = scan_leaf(mesh, q, p);
      if (t >= 0) return t;
    }
  }
  const int t = locate_brute_force(mesh, p);
  if (t < 0)
    throw OutsideDomain("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") is outside the meshed domain");
  return t;
}

Location locate_or_nearest(const TriMesh& mesh, const Quadtree& tree, Point2 p) {
  const int leaf = tree.find_leaf(p);
  if (leaf >= 0) {
    const Quadrant& q = tree.node(leaf);
    if (q.first_triangle >= 0) {
      const WalkResult w = walk(mesh, q.first_triangle, p);
      if (w.found) return {w.triangle, true};
      const int t = scan_leaf(mesh, q, p);
      if (t >= 0) return {t, true};
      return {w.triangle, false};
    }
    // Empty leaf: start from the closest populated neighbor and walk
    // toward p until the boundary stops the walk.
    for (int r = 1; r <= 4; ++r) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
          const int nb = tree.find_covering(q.level, q.ix + dx, q.iy + dy);
          if (nb < 0 || tree.node(nb).first_triangle < 0) continue;
          const double d = norm(tree.center(tree.node(nb)) - p);
          if (d < best_d) best_d = d, best = tree.node(nb).first_triangle;
        }
      }
      if (best >= 0) {
        const WalkResult w = walk(mesh, best, p);
        return {w.triangle, w.found};
      }
    }
  }
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point2 c = (1.0 / 3.0) * (mesh.vertices[static_cast<std::size_t>(tri[0])] +
                                    mesh.vertices[static_cast<std::size_t>(tri[1])] +
                                    mesh.vertices[static_cast<std::size_t>(tri[2])]);
    const double d = norm(c - p);
    if (d < best_d) best_d = d, best = static_cast<int>(t);
  }
  if (best < 0) throw OutsideDomain("empty mesh");
  return {best, contains(mesh, best, p)};
}

}  // namespace ebmfem::qt
