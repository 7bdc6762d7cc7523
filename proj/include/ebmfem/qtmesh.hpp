#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "ebmfem/geometry.hpp"

namespace ebmfem::qt {

/// Quadrant (level, ix, iy) covers [-1 + ix*s, -1 + (ix+1)*s] x ... with
/// s = 2 / 2^level. Children are ordered (0,0), (1,0), (0,1), (1,1).
struct Quadrant {
  int level = 0;
  std::int64_t ix = 0, iy = 0;
  int parent = -1;
  std::array<int, 4> child{-1, -1, -1, -1};
  int first_triangle = -1;  // locator seed; -1 when the leaf carries no triangles
  int triangle_count = 0;

  bool is_leaf() const { return child[0] < 0; }
};

class Quadtree {
 public:
  /// Leaves crossed by the boundary are refined to max_level, all others
  /// stop at min_level, then the tree is 2:1 balanced across edges.
  static Quadtree build(const ImplicitBoundary& boundary, int min_level, int max_level);
  /// Full tree of the given depth.
  static Quadtree uniform(int level);

  int min_level() const { return min_level_; }
  int max_level() const { return max_level_; }
  const std::vector<Quadrant>& nodes() const { return nodes_; }
  const Quadrant& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Quadrant& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::vector<int> leaves() const;

  static double size(int level) { return 2.0 / static_cast<double>(std::int64_t{1} << level); }
  Point2 lower_corner(const Quadrant& q) const;
  Point2 center(const Quadrant& q) const;

  /// Existing node (level, ix, iy), or -1.
  int find(int level, std::int64_t ix, std::int64_t iy) const;
  /// Deepest existing node covering (level, ix, iy); -1 when outside the root.
  int find_covering(int level, std::int64_t ix, std::int64_t iy) const;
  /// Leaf containing p (ties go to the upper/right quadrant); -1 outside the root.
  int find_leaf(Point2 p) const;

  /// Largest level difference between edge-adjacent leaves.
  int max_neighbor_level_jump() const;

  void split(int id);
  void balance();

 private:
  static std::uint64_t key(int level, std::int64_t ix, std::int64_t iy);

  int min_level_ = 0;
  int max_level_ = 0;
  std::vector<Quadrant> nodes_;
  std::unordered_map<std::uint64_t, int> index_;
};

struct MeshEdge {
  int v0 = -1, v1 = -1;  // v0 < v1
  int left = -1;          // triangle to the left of v0 -> v1
  int right = -1;
};

/// Conforming triangle mesh. Local edge k of a triangle is opposite
/// vertex k and runs from vertex k+1 to vertex k+2.
struct TriMesh {
  std::vector<Point2> vertices;
  std::vector<std::uint8_t> boundary_vertex;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<MeshEdge> edges;
  std::vector<std::array<int, 3>> triangle_edges;  // edge id opposite vertex k
  std::vector<std::array<int, 3>> neighbors;       // triangle across edge k, or -1

  /// Rebuilds edges, triangle_edges and neighbors from triangles.
  void build_topology();
  double signed_area(int t) const;
  bool is_boundary_edge(int e) const {
    const auto& ed = edges[static_cast<std::size_t>(e)];
    return ed.left < 0 || ed.right < 0;
  }
  std::size_t interior_edge_count() const;
  /// Barycentric coordinates of p in triangle t.
  std::array<double, 3> barycentric(int t, Point2 p) const;
};

/// Incremental mesh generation over a balanced quadtree. Vertices are
/// keyed by exact lattice coordinates and crossings by lattice sub-edge,
/// so shared vertices are created once.
class MeshBuilder {
 public:
  MeshBuilder(Quadtree& tree, const ImplicitBoundary& boundary);

  /// Triangulates leaves lying fully inside: two triangles, or a center
  /// fan when a side carries a hanging node.
  void triangulate_full();
  /// Marching-squares recovery of the boundary in cut leaves. Throws
  /// AmbiguousTopology or AssumptionViolation.
  void recover_boundary();
  /// Mesh with topology built (no projection).
  TriMesh mesh() const;

  std::size_t full_leaf_count() const { return full_leaves_; }
  std::size_t partial_leaf_count() const { return partial_leaves_; }

 private:
  struct LeafCycle {
    std::vector<std::uint64_t> keys;  // lattice vertices around the leaf, counter-clockwise
    bool hanging = false;
  };
  LeafCycle cycle(const Quadrant& q) const;
  int lattice_vertex(std::uint64_t key);
  Point2 lattice_point(std::uint64_t key) const;
  double lattice_level(std::uint64_t key);
  /// Crossing vertex on sub-edge (a, b), or -1 when uncut.
  int crossing_vertex(std::uint64_t a, std::uint64_t b);
  int new_vertex(Point2 p, bool on_boundary);
  void add_triangle(int leaf, int a, int b, int c);
  void triangulate_polygon(int leaf, const std::vector<int>& poly, bool fan_from_centroid);

  Quadtree& tree_;
  ImplicitBoundary boundary_;
  std::int64_t lattice_ = 0;
  std::vector<Point2> vertices_;
  std::vector<std::uint8_t> on_boundary_;
  std::vector<std::array<int, 3>> triangles_;
  std::unordered_map<std::uint64_t, int> lattice_index_;
  std::unordered_map<std::uint64_t, double> lattice_level_;
  std::unordered_map<std::uint64_t, int> crossing_index_;  // keyed by sub-edge, -1 if uncut
  std::vector<std::uint8_t> done_;                         // per node
  std::size_t full_leaves_ = 0;
  std::size_t partial_leaves_ = 0;
};

/// Moves boundary vertices radially onto the curve. Throws
/// InvertedElement if any triangle loses positive area.
void postprocess(TriMesh& mesh, const ImplicitBoundary& boundary);

struct MeshResult {
  Quadtree tree;
  TriMesh mesh;
};

/// build_quadtree + triangulate_full + recover_boundary + postprocess.
MeshResult generate_mesh(const ImplicitBoundary& boundary, int min_level, int max_level);

/// Tree descent to a leaf, its seed triangle, then a walk across edges.
/// Falls back to a scan of the leaf and then of the whole mesh. Throws
/// OutsideDomain.
int point_locate(const TriMesh& mesh, const Quadtree& tree, Point2 p);
/// Exhaustive O(N) scan; -1 when no triangle contains p.
int locate_brute_force(const TriMesh& mesh, Point2 p);

struct Location {
  int triangle = -1;
  bool inside = false;
};
/// Like point_locate, but for points outside the meshed polygon returns
/// a nearby boundary triangle (inside = false) instead of throwing.
Location locate_or_nearest(const TriMesh& mesh, const Quadtree& tree, Point2 p);

inline constexpr double kBarycentricTol = 1e-12;

/// "nv nt ne", then "x y boundary_flag", "v0 v1 v2", "v0 v1 t_left t_right".
void write_mesh(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh(std::istream& is);

}  // namespace ebmfem::qt
