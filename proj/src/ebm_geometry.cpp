#include <algorithm>
#include <cmath>
#include <limits>

#include "ebmfem/ebm.hpp"
#include "ebmfem/errors.hpp"

namespace ebmfem::ebm {

CartesianGrid CartesianGrid::make(int n) {
  if (n < 2 || (n & (n - 1)) != 0) throw InvalidArgument("grid size must be a power of two >= 2");
  return {n, 2.0 / n, {-1.0, -1.0}};
}

const char* to_string(CellClass c) {
  switch (c) {
    case CellClass::Internal:
      return "INTERNAL";
    case CellClass::Partial:
      return "PARTIAL";
    case CellClass::External:
      return "EXTERNAL";
  }
  return "?";
}

double EbmGeometry::volume(std::size_t cell) const {
  const auto pid = partial_id[cell];
  return pid >= 0 ? partial[static_cast<std::size_t>(pid)].volume : grid.h * grid.h;
}

Point2 EbmGeometry::centroid(std::size_t cell) const {
  const auto pid = partial_id[cell];
  if (pid >= 0) return partial[static_cast<std::size_t>(pid)].centroid;
  const int i = static_cast<int>(cell % static_cast<std::size_t>(grid.n));
  const int j = static_cast<int>(cell / static_cast<std::size_t>(grid.n));
  return grid.center(i, j);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kEdgeSamples = 8;

/// Edge k of a cell runs from corner k to corner k+1 (counter-clockwise:
/// bottom, right, top, left). Face index of that edge:
constexpr std::array<int, 4> kEdgeFace{2, 1, 3, 0};

struct CellCut {
  std::array<Point2, 4> corner;
  std::array<bool, 4> in;
  std::array<std::optional<Point2>, 4> cross;
};

/// Vertex levels and per-grid-edge crossings for a whole grid.
struct GridCuts {
  int n = 0;
  std::vector<double> lev;     // (n+1)^2, index j*(n+1)+i
  std::vector<double> vcross;  // vertical edge (i,j)-(i,j+1): index i*n+j, param from lower vertex
  std::vector<double> hcross;  // horizontal edge (i,j)-(i+1,j): index j*n+i

  double vlevel(int i, int j) const { return lev[static_cast<std::size_t>(j) * (n + 1) + i]; }
};

GridCuts compute_cuts(const CartesianGrid& grid, const ImplicitBoundary& b, double min_volume_fraction) {
  GridCuts c;
  const int n = grid.n;
  c.n = n;
  c.lev.resize(static_cast<std::size_t>(n + 1) * (n + 1));
  c.vcross.assign(static_cast<std::size_t>(n + 1) * n, kNaN);
  c.hcross.assign(static_cast<std::size_t>(n + 1) * n, kNaN);
#pragma omp parallel for schedule(static)
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) c.lev[static_cast<std::size_t>(j) * (n + 1) + i] = level(b, grid.vertex(i, j));
  }
  bool violated = false;
#pragma omp parallel for schedule(dynamic, 8) reduction(|| : violated)
  for (int a = 0; a <= n; ++a) {
    for (int m = 0; m < n; ++m) {
      // vertical edge (a, m)-(a, m+1) and horizontal edge (m, a)-(m+1, a)
      for (int dir = 0; dir < 2; ++dir) {
        const int i0 = dir == 0 ? a : m, j0 = dir == 0 ? m : a;
        const int i1 = dir == 0 ? a : m + 1, j1 = dir == 0 ? m + 1 : a;
        const double l0 = c.vlevel(i0, j0), l1 = c.vlevel(i1, j1);
        const Point2 p0 = grid.vertex(i0, j0), p1 = grid.vertex(i1, j1);
        if (!provably_far(b, l0, l1, grid.h) &&
            sample_edge_cut(b, p0, p1, min_volume_fraction, kEdgeSamples) == EdgeCut::Violation) {
          violated = true;
        }
        if ((l0 < 0.0) != (l1 < 0.0)) {
          const double t = *segment_intersection_param(b, p0, p1);
          if (dir == 0) {
            c.vcross[static_cast<std::size_t>(a) * n + m] = t;
          } else {
            c.hcross[static_cast<std::size_t>(a) * n + m] = t;
          }
        }
      }
    }
  }
  if (violated) {
    throw AssumptionViolation("a grid edge crosses the boundary more than once; refine the grid");
  }
  return c;
}

CellCut cell_cut(const CartesianGrid& grid, const GridCuts& c, int i, int j) {
  CellCut cut;
  const std::array<std::pair<int, int>, 4> v{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
  for (int k = 0; k < 4; ++k) {
    cut.corner[k] = grid.vertex(v[k].first, v[k].second);
    cut.in[k] = c.vlevel(v[k].first, v[k].second) < 0.0;
  }
  const int n = grid.n;
  const double tb = c.hcross[static_cast<std::size_t>(j) * n + i];
  const double tr = c.vcross[static_cast<std::size_t>(i + 1) * n + j];
  const double tt = c.hcross[static_cast<std::size_t>(j + 1) * n + i];
  const double tl = c.vcross[static_cast<std::size_t>(i) * n + j];
  // Global params run from the lower vertex; top and left edges run backwards locally.
  if (!std::isnan(tb)) cut.cross[0] = lerp(cut.corner[0], cut.corner[1], tb);
  if (!std::isnan(tr)) cut.cross[1] = lerp(cut.corner[1], cut.corner[2], tr);
  if (!std::isnan(tt)) cut.cross[2] = lerp(cut.corner[3], cut.corner[2], tt);
  if (!std::isnan(tl)) cut.cross[3] = lerp(cut.corner[0], cut.corner[3], tl);
  return cut;
}

int crossing_count(const CellCut& cut) {
  return static_cast<int>(std::count_if(cut.cross.begin(), cut.cross.end(),
                                        [](const auto& c) { return c.has_value(); }));
}

CellClass classify(const CellCut& cut) {
  const int nc = crossing_count(cut);
  if (nc == 0) {
    const int nin = static_cast<int>(std::count(cut.in.begin(), cut.in.end(), true));
    if (nin == 4) return CellClass::Internal;
    if (nin == 0) return CellClass::External;
    throw AssumptionViolation("inconsistent corner signs without crossings");
  }
  if (nc == 2) return CellClass::Partial;
  throw AssumptionViolation("cell is cut into several pieces; refine the grid");
}

void polygon_area_centroid(const std::vector<Point2>& poly, double& area, Point2& centroid) {
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  // Shifted to the first vertex for accuracy.
  const Point2 o = poly.front();
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point2 p = poly[k] - o;
    const Point2 q = poly[(k + 1) % poly.size()] - o;
    const double w = cross(p, q);
    a2 += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  area = 0.5 * a2;
  centroid = a2 != 0.0 ? o + Point2{cx / (3.0 * a2), cy / (3.0 * a2)} : o;
}

PartialCellGeom geometry_from_cut(const CellCut& cut, double h) {
  PartialCellGeom g;
  int leave = -1, enter = -1;
  std::array<int, 4> cross_pos{-1, -1, -1, -1};
  for (int k = 0; k < 4; ++k) {
    if (cut.in[k]) g.polygon.push_back(cut.corner[k]);
    if (cut.cross[k]) {
      cross_pos[k] = static_cast<int>(g.polygon.size());
      g.polygon.push_back(*cut.cross[k]);
      if (cut.in[k]) {
        leave = k;
      } else {
        enter = k;
      }
    }
  }
  if (g.polygon.size() < 3 || leave < 0 || enter < 0) {
    throw GeometryDegenerate("clipped cell polygon has fewer than 3 vertices");
  }
  polygon_area_centroid(g.polygon, g.volume, g.centroid);
  if (!(g.volume > 0.0)) throw GeometryDegenerate("clipped cell polygon has no area");

  for (int k = 0; k < 4; ++k) {
    EdgeGeom& e = g.edges[kEdgeFace[k]];
    const Point2 a = cut.corner[k], b = cut.corner[(k + 1) % 4];
    const bool ia = cut.in[k], ib = cut.in[(k + 1) % 4];
    if (ia && ib) {
      e = {EdgeClass::Full, lerp(a, b, 0.5), h};
    } else if (ia || ib) {
      const Point2 in_end = ia ? a : b;
      const Point2 x = *cut.cross[k];
      e = {EdgeClass::Partial, lerp(in_end, x, 0.5), norm(x - in_end)};
    } else {
      e = {EdgeClass::External, lerp(a, b, 0.5), 0.0};
    }
  }
  g.chord_a = *cut.cross[leave];
  g.chord_b = *cut.cross[enter];
  g.chord_mid = lerp(g.chord_a, g.chord_b, 0.5);
  const Vec2 d = g.chord_b - g.chord_a;
  g.chord_length = norm(d);
  g.chord_normal = g.chord_length > 0.0 ? (1.0 / g.chord_length) * Vec2{d.y, -d.x} : Vec2{};
  return g;
}

/// Grows the in-domain part of a small cell by sliding both crossings
/// toward the outside corners of their edges until the area reaches
/// `target`. Returns true when the cut was modified.
bool grow_small_cell(CellCut& cut, double h, double target) {
  const auto area_of = [&](const CellCut& c) { return geometry_from_cut(c, h).volume; };
  if (area_of(cut) >= target) return false;
  struct Slide {
    int edge;
    Point2 from, dir;
    double d0;
  };
  std::vector<Slide> slides;
  for (int k = 0; k < 4; ++k) {
    if (!cut.cross[k]) continue;
    const Point2 a = cut.corner[k], b = cut.corner[(k + 1) % 4];
    const Point2 from = cut.in[k] ? a : b;
    const Point2 to = cut.in[k] ? b : a;
    slides.push_back({k, from, (1.0 / h) * (to - from), norm(*cut.cross[k] - from)});
  }
  auto apply = [&](double s) {
    CellCut c = cut;
    for (const auto& sl : slides) {
      const double d = sl.d0 + s * (h - sl.d0);
      c.cross[sl.edge] = sl.from + d * sl.dir;
    }
    return c;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (area_of(apply(mid)) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  cut = apply(hi);
  return true;
}

void store_cut(GridCuts& c, const CellCut& cut, int i, int j, double h) {
  const int n = c.n;
  auto param = [h](Point2 from, Point2 p) { return norm(p - from) / h; };
  if (cut.cross[0]) c.hcross[static_cast<std::size_t>(j) * n + i] = param(cut.corner[0], *cut.cross[0]);
  if (cut.cross[1]) c.vcross[static_cast<std::size_t>(i + 1) * n + j] = param(cut.corner[1], *cut.cross[1]);
  if (cut.cross[2]) c.hcross[static_cast<std::size_t>(j + 1) * n + i] = param(cut.corner[3], *cut.cross[2]);
  if (cut.cross[3]) c.vcross[static_cast<std::size_t>(i) * n + j] = param(cut.corner[0], *cut.cross[3]);
}

}  // namespace

std::vector<CellClass> classify_cells(const CartesianGrid& grid, const ImplicitBoundary& boundary) {
  boundary.validate();
  const GridCuts cuts = compute_cuts(grid, boundary, kDefaultMinVolumeFraction);
  std::vector<CellClass> cls(static_cast<std::size_t>(grid.n) * grid.n);
  for (int j = 0; j < grid.n; ++j) {
    for (int i = 0; i < grid.n; ++i) cls[grid.cell_index(i, j)] = classify(cell_cut(grid, cuts, i, j));
  }
  return cls;
}

PartialCellGeom partial_geometry(const CartesianGrid& grid, const ImplicitBoundary& boundary, int i,
                                 int j, double min_volume_fraction) {
  CellCut cut;
  const std::array<std::pair<int, int>, 4> v{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
  for (int k = 0; k < 4; ++k) {
    cut.corner[k] = grid.vertex(v[k].first, v[k].second);
    cut.in[k] = level(boundary, cut.corner[k]) < 0.0;
  }
  for (int k = 0; k < 4; ++k) {
    cut.cross[k] = segment_intersection(boundary, cut.corner[k], cut.corner[(k + 1) % 4]);
  }
  if (classify(cut) != CellClass::Partial) throw InvalidArgument("cell is not partial");
  grow_small_cell(cut, grid.h, min_volume_fraction * grid.h * grid.h);
  return geometry_from_cut(cut, grid.h);
}

EbmGeometry build_geometry(const CartesianGrid& grid, const std::optional<ImplicitBoundary>& boundary,
                           double min_volume_fraction) {
  EbmGeometry g;
  g.grid = grid;
  g.boundary = boundary;
  g.min_volume_fraction = min_volume_fraction;
  const std::size_t ncell = static_cast<std::size_t>(grid.n) * grid.n;
  g.cls.assign(ncell, CellClass::Internal);
  g.row.assign(ncell, -1);
  g.partial_id.assign(ncell, -1);

  if (boundary) {
    boundary->validate();
    GridCuts cuts = compute_cuts(grid, *boundary, min_volume_fraction);
    for (int j = 0; j < grid.n; ++j) {
      for (int i = 0; i < grid.n; ++i) g.cls[grid.cell_index(i, j)] = classify(cell_cut(grid, cuts, i, j));
    }
    // A cell on the box boundary must be external for the box faces to be irrelevant.
    for (int m = 0; m < grid.n; ++m) {
      for (auto idx : {grid.cell_index(m, 0), grid.cell_index(m, grid.n - 1), grid.cell_index(0, m),
                       grid.cell_index(grid.n - 1, m)}) {
        if (g.cls[idx] != CellClass::External) {
          throw AssumptionViolation("boundary must lie strictly inside the grid box");
        }
      }
    }
    const double target = min_volume_fraction * grid.h * grid.h;
    for (int j = 0; j < grid.n; ++j) {
      for (int i = 0; i < grid.n; ++i) {
        if (g.cls[grid.cell_index(i, j)] != CellClass::Partial) continue;
        CellCut cut = cell_cut(grid, cuts, i, j);
        if (grow_small_cell(cut, grid.h, target)) {
          store_cut(cuts, cut, i, j, grid.h);
          ++g.adjusted_cells;
        }
      }
    }
    for (int j = 0; j < grid.n; ++j) {
      for (int i = 0; i < grid.n; ++i) {
        const auto idx = grid.cell_index(i, j);
        if (g.cls[idx] != CellClass::Partial) continue;
        g.partial_id[idx] = static_cast<std::int32_t>(g.partial.size());
        g.partial.push_back(geometry_from_cut(cell_cut(grid, cuts, i, j), grid.h));
      }
    }
  }
  for (std::size_t idx = 0; idx < ncell; ++idx) {
    if (g.cls[idx] == CellClass::External) continue;
    g.row[idx] = static_cast<std::int32_t>(g.row_cell.size());
    g.row_cell.push_back(idx);
  }
  return g;
}

StencilCoeffs flux_stencil(int d, Vec2 r, double h) {
  if (d != 0 && d != 1) throw InvalidArgument("direction must be 0 or 1");
  const double rd = d == 0 ? r.x : r.y;
  const double rt = d == 0 ? r.y : r.x;
  if (std::abs(rt) > 0.5 * h * (1.0 + 1e-12)) throw InvalidArgument("stencil offset exceeds half a cell");
  const double a = std::min(std::abs(rt) / h, 0.5);
  const int sd = rd >= 0.0 ? 1 : -1;
  const int st = rt >= 0.0 ? 1 : -1;
  StencilCoeffs c{};
  auto at = [&](int along, int across) -> double& {
    // along: offset in direction d, across: offset in the other direction
    const int ox = d == 0 ? along : across;
    const int oy = d == 0 ? across : along;
    return c[1 + ox][1 + oy];
  };
  at(0, 0) += (a - 1.0) / h;
  at(sd, 0) += (1.0 - a) / h;
  at(0, st) += -a / h;
  at(sd, st) += a / h;
  return c;
}

}  // namespace ebmfem::ebm
