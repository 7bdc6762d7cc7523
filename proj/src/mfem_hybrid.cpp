#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "ebmfem/errors.hpp"
#include "ebmfem/mfem.hpp"

namespace ebmfem::mfem {

namespace {

std::array<Point2, 3> corners(const qt::TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  return {mesh.vertices[static_cast<std::size_t>(tri[0])], mesh.vertices[static_cast<std::size_t>(tri[1])],
          mesh.vertices[static_cast<std::size_t>(tri[2])]};
}

// Elements are processed in chunks: local work in parallel, then added
// to the global matrix in element order.
constexpr std::size_t kChunk = 4096;

Eigen::VectorXd local_multipliers(const qt::TriMesh& mesh, int t, int m, const std::vector<int>& edge_row,
                                  const std::vector<double>& mu) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * m);
  for (int e = 0; e < 3; ++e) {
    const int row = edge_row[static_cast<std::size_t>(mesh.triangle_edges[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)])];
    if (row < 0) continue;
    for (int k = 0; k < m; ++k) out(e * m + k) = mu[static_cast<std::size_t>(row + k)];
  }
  return out;
}

}  // namespace

std::array<int, 3> edge_orientation(const qt::TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  std::array<int, 3> o{};
  for (int e = 0; e < 3; ++e)
    o[static_cast<std::size_t>(e)] = tri[static_cast<std::size_t>((e + 1) % 3)] < tri[static_cast<std::size_t>((e + 2) % 3)] ? 1 : -1;
  return o;
}

ElementBoundaryData boundary_data(FluxSpace space, const qt::TriMesh& mesh, int t, const ExactField& exact) {
  const SpaceInfo info = space_info(space);
  const int m = info.multipliers_per_edge;
  ElementBoundaryData bd;
  bd.flux = Eigen::VectorXd::Zero(info.flux_dofs);
  const auto v = corners(mesh, t);
  for (int e = 0; e < 3; ++e) {
    const int edge = mesh.triangle_edges[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
    if (!mesh.is_boundary_edge(edge)) continue;
    bd.boundary[static_cast<std::size_t>(e)] = true;
    const Point2 a = v[static_cast<std::size_t>((e + 1) % 3)], b = v[static_cast<std::size_t>((e + 2) % 3)];
    const Vec2 nu{b.y - a.y, a.x - b.x};  // outward normal times edge length
    for (int k = 0; k < m; ++k) {
      double acc = 0.0;
      for (const auto& q : line_rule()) acc -= q.w * dot(exact.grad(lerp(a, b, q.t)), nu) * legendre(k, q.t);
      bd.flux(e * m + k) = acc;
    }
  }
  return bd;
}

HybridSystem assemble_hybrid(const qt::TriMesh& mesh, FluxSpace space, const ExactField& exact, bool pin) {
  const SpaceInfo info = space_info(space);
  const int m = info.multipliers_per_edge;
  HybridSystem sys;
  sys.space = space;
  sys.edge_row.assign(mesh.edges.size(), -1);
  int rows = 0;
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (mesh.is_boundary_edge(static_cast<int>(e))) continue;
    sys.edge_row[e] = rows;
    rows += m;
    ++sys.interior_edges;
  }
  if (rows == 0) throw SingularSystem("mesh has no interior edges");

  std::vector<std::vector<sparse::Index>> pattern(static_cast<std::size_t>(rows));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (int a : mesh.triangle_edges[t]) {
      const int ra = sys.edge_row[static_cast<std::size_t>(a)];
      if (ra < 0) continue;
      for (int b : mesh.triangle_edges[t]) {
        const int rb = sys.edge_row[static_cast<std::size_t>(b)];
        if (rb < 0) continue;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) pattern[static_cast<std::size_t>(ra + i)].push_back(rb + j);
      }
    }
  }
  sys.matrix = sparse::csr_from_pattern(static_cast<std::size_t>(rows), pattern);
  pattern.clear();
  sys.rhs.assign(static_cast<std::size_t>(rows), 0.0);

  const auto nt = mesh.triangles.size();
  std::vector<Condensed> local(std::min(nt, kChunk));
  for (std::size_t begin = 0; begin < nt; begin += kChunk) {
    const std::size_t end = std::min(nt, begin + kChunk);
    const auto count = static_cast<std::ptrdiff_t>(end - begin);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const int t = static_cast<int>(begin) + static_cast<int>(i);
      const LocalMatrices lm = local_matrices(space, corners(mesh, t), edge_orientation(mesh, t), exact.laplacian);
      local[static_cast<std::size_t>(i)] = condense(lm, boundary_data(space, mesh, t, exact));
    }
    for (std::size_t i = 0; i < end - begin; ++i) {
      const auto& te = mesh.triangle_edges[begin + i];
      const Condensed& c = local[i];
      for (int ea = 0; ea < 3; ++ea) {
        const int ra = sys.edge_row[static_cast<std::size_t>(te[static_cast<std::size_t>(ea)])];
        if (ra < 0) continue;
        for (int ka = 0; ka < m; ++ka) {
          sys.rhs[static_cast<std::size_t>(ra + ka)] += c.h(ea * m + ka);
          for (int eb = 0; eb < 3; ++eb) {
            const int rb = sys.edge_row[static_cast<std::size_t>(te[static_cast<std::size_t>(eb)])];
            if (rb < 0) continue;
            for (int kb = 0; kb < m; ++kb)
              sys.matrix.add(static_cast<std::size_t>(ra + ka), static_cast<std::size_t>(rb + kb), c.H(ea * m + ka, eb * m + kb));
          }
        }
      }
    }
  }

  if (!pin) return sys;
  // Pin the degree-0 multiplier of the interior edge closest to the
  // center of the bounding box of the mesh to the mean of phi on it.
  Point2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point2 hi = -1.0 * lo;
  for (const Point2& p : mesh.vertices) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const Point2 mid = 0.5 * (lo + hi);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (sys.edge_row[e] < 0) continue;
    const Point2 c = 0.5 * (mesh.vertices[static_cast<std::size_t>(mesh.edges[e].v0)] +
                            mesh.vertices[static_cast<std::size_t>(mesh.edges[e].v1)]);
    const double d = norm(c - mid);
    if (d < best_d) best_d = d, best = static_cast<int>(e);
  }
  const auto& pe = mesh.edges[static_cast<std::size_t>(best)];
  double mean = 0.0;
  for (const auto& q : line_rule())
    mean += q.w * exact.phi(lerp(mesh.vertices[static_cast<std::size_t>(pe.v0)], mesh.vertices[static_cast<std::size_t>(pe.v1)], q.t));
  sys.pinned_row = sys.edge_row[static_cast<std::size_t>(best)];
  sys.pinned_value = mean;
  // With a single interior edge the constant nullspace makes the pinned
  // diagonal vanish; give it the matrix scale instead.
  const auto pr = static_cast<std::size_t>(sys.pinned_row);
  double scale = 0.0;
  for (double v : sys.matrix.values()) scale = std::max(scale, std::abs(v));
  const double diag = sys.matrix.coeff(pr, pr);
  if (diag < -1e-12 * scale) throw SingularSystem("pinned multiplier has negative diagonal coupling");
  if (diag <= 1e-12 * scale) sys.matrix.add(pr, pr, (scale > 0.0 ? scale : 1.0) - diag);
  // The constant on degree-0 multipliers spans the nullspace, so pin to
  // zero and shift afterwards; this keeps the pin out of the rhs.
  sys.matrix.pin(static_cast<std::size_t>(sys.pinned_row), 0.0, sys.rhs, true);
  return sys;
}

FieldSolution recover_all(const qt::TriMesh& mesh, FluxSpace space, const std::vector<int>& edge_row,
                          const std::vector<double>& multipliers, const ExactField& exact) {
  const int m = space_info(space).multipliers_per_edge;
  FieldSolution sol;
  sol.space = space;
  sol.multipliers = multipliers;
  const auto nt = static_cast<std::ptrdiff_t>(mesh.triangles.size());
  sol.flux.resize(static_cast<std::size_t>(nt));
  sol.potential.resize(static_cast<std::size_t>(nt));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nt; ++i) {
    const int t = static_cast<int>(i);
    const LocalMatrices lm = local_matrices(space, corners(mesh, t), edge_orientation(mesh, t), exact.laplacian);
    ElementSolution es = recover(lm, boundary_data(space, mesh, t, exact), local_multipliers(mesh, t, m, edge_row, multipliers));
    sol.flux[static_cast<std::size_t>(i)] = std::move(es.flux);
    sol.potential[static_cast<std::size_t>(i)] = std::move(es.potential);
  }
  return sol;
}

FieldSolution solve_and_recover(const qt::TriMesh& mesh, const HybridSystem& system, const ExactField& exact,
                                double tol, std::size_t max_iter) {
  const sparse::Ilu0Factors ilu = sparse::ilu0_factorize(system.matrix);
  sparse::SolveResult r = sparse::bicgstab(system.matrix, ilu, system.rhs, tol, max_iter);
  if (system.pinned_row >= 0) {
    const int m = space_info(system.space).multipliers_per_edge;
    const double shift = system.pinned_value - r.x[static_cast<std::size_t>(system.pinned_row)];
    for (std::size_t i = 0; i < r.x.size(); i += static_cast<std::size_t>(m)) r.x[i] += shift;
  }
  FieldSolution sol = recover_all(mesh, system.space, system.edge_row, r.x, exact);
  sol.report = r.report;
  return sol;
}

Vec2 eval_flux_in(const FieldSolution& sol, const qt::TriMesh& mesh, int t, Point2 p) {
  const ReferenceElement& ref = reference_element(sol.space);
  const ElementMap map = ElementMap::make(corners(mesh, t));
  thread_local std::vector<Vec2> s;
  ref.flux(map.to_reference(p), s);
  const Eigen::VectorXd& u = sol.flux[static_cast<std::size_t>(t)];
  Vec2 acc{};
  for (std::size_t j = 0; j < s.size(); ++j) acc = acc + u(static_cast<Eigen::Index>(j)) * s[j];
  return map.piola(acc);
}

double eval_potential_in(const FieldSolution& sol, const qt::TriMesh& mesh, int t, Point2 p) {
  const ReferenceElement& ref = reference_element(sol.space);
  const ElementMap map = ElementMap::make(corners(mesh, t));
  thread_local std::vector<double> v;
  ref.potential(map.to_reference(p), v);
  const Eigen::VectorXd& c = sol.potential[static_cast<std::size_t>(t)];
  double acc = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) acc += c(static_cast<Eigen::Index>(j)) * v[j];
  return acc;
}

Vec2 eval_flux(const FieldSolution& sol, const qt::TriMesh& mesh, const qt::Quadtree& tree, Point2 p) {
  return eval_flux_in(sol, mesh, qt::point_locate(mesh, tree, p), p);
}

void write_solution(std::ostream& os, const FieldSolution& sol) {
  char buf[40];
  os << to_string(sol.space) << ' ' << sol.flux.size() << ' ' << sol.multipliers.size() << '\n';
  for (std::size_t t = 0; t < sol.flux.size(); ++t) {
    os << t;
    for (Eigen::Index j = 0; j < sol.flux[t].size(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", sol.flux[t](j));
      os << buf;
    }
    os << '\n';
  }
  for (double v : sol.multipliers) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

}  // namespace ebmfem::mfem
