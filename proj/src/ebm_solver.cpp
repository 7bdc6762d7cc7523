#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "ebmfem/ebm.hpp"
#include "ebmfem/errors.hpp"

namespace ebmfem::ebm {

namespace {

constexpr std::array<std::array<int, 2>, 4> kFaceOffset{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

Vec2 face_normal(int face) {
  return face_direction(face) == 0 ? Vec2{double(face_sign(face)), 0.0} : Vec2{0.0, double(face_sign(face))};
}

std::pair<int, int> cell_ij(const CartesianGrid& g, std::size_t cell) {
  return {static_cast<int>(cell % static_cast<std::size_t>(g.n)),
          static_cast<int>(cell / static_cast<std::size_t>(g.n))};
}

double potential_at(const EbmGeometry& geom, std::span<const double> phi, int i, int j) {
  return phi[static_cast<std::size_t>(geom.row[geom.grid.cell_index(i, j)])];
}

}  // namespace

EbmSystem assemble_ebm(const EbmGeometry& geom, const ExactField& exact) {
  const auto& grid = geom.grid;
  const double h = grid.h;
  const std::size_t nrow = geom.unknowns();
  if (nrow == 0) throw SingularSystem("no cells inside the domain");

  std::vector<sparse::Triplet> trip;
  trip.reserve(nrow * 9);
  std::vector<double> rhs(nrow, 0.0);
  std::vector<double> vol(nrow, 0.0);

  auto require_row = [&](int i, int j) {
    if (!geom.has_row(i, j)) {
      throw StencilUnavailable("flux stencil reaches a cell outside the domain; refine the grid");
    }
    return geom.row[grid.cell_index(i, j)];
  };

  for (std::size_t r = 0; r < nrow; ++r) {
    const std::size_t cell = geom.row_cell[r];
    const auto [i, j] = cell_ij(grid, cell);
    const auto row = static_cast<sparse::Index>(r);
    const double v = geom.volume(cell);
    vol[r] = v;
    const auto pid = geom.partial_id[cell];
    if (pid < 0) {
      double diag = 0.0;
      for (int f = 0; f < 4; ++f) {
        const int ni = i + kFaceOffset[f][0], nj = j + kFaceOffset[f][1];
        if (!grid.contains(ni, nj)) {
          // Box face: Neumann flux from the exact field.
          const Point2 fc = grid.center(i, j) + (0.5 * h) * face_normal(f);
          rhs[r] -= h * dot(exact.grad(fc), face_normal(f)) / v;
          continue;
        }
        trip.push_back({row, require_row(ni, nj), 1.0 / (h * h)});
        diag -= 1.0 / (h * h);
      }
      trip.push_back({row, row, diag});
      rhs[r] += exact.laplacian(grid.center(i, j));
      continue;
    }

    const PartialCellGeom& pg = geom.partial[static_cast<std::size_t>(pid)];
    const Point2 c = grid.center(i, j);
    for (int f = 0; f < 4; ++f) {
      const EdgeGeom& e = pg.edges[f];
      if (e.cls == EdgeClass::External || e.length == 0.0) continue;
      const int d = face_direction(f);
      // Anchor the offset on the face plane so full edges reduce to the centered difference.
      Vec2 rvec = e.center - c;
      if (e.cls == EdgeClass::Full) rvec = (0.5 * h) * face_normal(f);
      const StencilCoeffs st = flux_stencil(d, rvec, h);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          if (st[a][b] == 0.0) continue;
          const auto col = require_row(i + a - 1, j + b - 1);
          trip.push_back({row, col, e.length * st[a][b] / v});
        }
      }
    }
    rhs[r] -= pg.chord_length * dot(exact.grad(pg.chord_mid), pg.chord_normal) / v;
    rhs[r] += exact.laplacian(pg.centroid);
  }

  EbmSystem sys;
  sys.matrix = sparse::csr_from_triplets(nrow, trip);

  // The rows sum to zero against the cell volumes; shift the source so
  // the singular Neumann system is consistent before pinning.
  double vsum = 0.0, defect = 0.0;
  for (std::size_t r = 0; r < nrow; ++r) {
    vsum += vol[r];
    defect += vol[r] * rhs[r];
  }
  sys.compatibility_shift = defect / vsum;
  for (double& x : rhs) x -= sys.compatibility_shift;

  const Point2 target = geom.boundary ? geom.boundary->center : Point2{0.0, 0.0};
  double best = std::numeric_limits<double>::infinity();
  std::size_t pin = nrow;
  for (std::size_t r = 0; r < nrow; ++r) {
    const std::size_t cell = geom.row_cell[r];
    if (geom.cls[cell] != CellClass::Internal) continue;
    const auto [i, j] = cell_ij(grid, cell);
    const double dist = norm(grid.center(i, j) - target);
    if (dist < best) {
      best = dist;
      pin = r;
    }
  }
  if (pin == nrow) throw SingularSystem("no internal cell available to pin the potential");
  const auto [pi, pj] = cell_ij(grid, geom.row_cell[pin]);
  sys.matrix.pin(pin, exact.phi(grid.center(pi, pj)), rhs, false);
  sys.pinned_row = pin;
  sys.rhs = std::move(rhs);
  return sys;
}

namespace {

/// d-derivative at cell (i, j) from centered differences when both
/// neighbours exist, otherwise from the one-sided three-point parabola.
std::optional<double> cell_derivative(const EbmGeometry& geom, std::span<const double> phi, int i,
                                      int j, int d, bool centered_only) {
  const double h = geom.grid.h;
  const int di = d == 0 ? 1 : 0, dj = d == 0 ? 0 : 1;
  const bool minus = geom.has_row(i - di, j - dj);
  const bool plus = geom.has_row(i + di, j + dj);
  if (minus && plus) {
    return (potential_at(geom, phi, i + di, j + dj) - potential_at(geom, phi, i - di, j - dj)) / (2.0 * h);
  }
  if (centered_only) return std::nullopt;
  const double p0 = potential_at(geom, phi, i, j);
  if (plus && geom.has_row(i + 2 * di, j + 2 * dj)) {
    const double p1 = potential_at(geom, phi, i + di, j + dj);
    const double p2 = potential_at(geom, phi, i + 2 * di, j + 2 * dj);
    return (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * h);
  }
  if (minus && geom.has_row(i - 2 * di, j - 2 * dj)) {
    const double p1 = potential_at(geom, phi, i - di, j - dj);
    const double p2 = potential_at(geom, phi, i - 2 * di, j - 2 * dj);
    return (3.0 * p0 - 4.0 * p1 + p2) / (2.0 * h);
  }
  return std::nullopt;
}

/// Gradient at the center of (i, j) from a least-squares quadratic over
/// the potentials in the surrounding 5x5 block.
std::optional<Vec2> fitted_gradient(const EbmGeometry& geom, std::span<const double> phi, int i, int j) {
  const double h = geom.grid.h;
  std::vector<std::array<double, 6>> rows;
  std::vector<double> vals;
  for (int b = -2; b <= 2; ++b) {
    for (int a = -2; a <= 2; ++a) {
      if (!geom.has_row(i + a, j + b)) continue;
      rows.push_back({1.0, double(a), double(b), double(a * a), double(a * b), double(b * b)});
      vals.push_back(potential_at(geom, phi, i + a, j + b));
    }
  }
  if (rows.size() < 6) return std::nullopt;
  Eigen::MatrixXd m(rows.size(), 6);
  Eigen::VectorXd v(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < 6; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
    v(static_cast<Eigen::Index>(r)) = vals[r];
  }
  const auto qr = m.colPivHouseholderQr();
  if (qr.rank() < 6) return std::nullopt;
  const Eigen::VectorXd coef = qr.solve(v);
  return Vec2{coef(1) / h, coef(2) / h};
}

double linear_through(double x0, double y0, double x1, double y1, double x) {
  return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
}

/// Value of the d-derivative on center line m (running along d) at
/// coordinate s along d, from the two nearest usable cell values.
std::optional<double> line_value(const EbmGeometry& geom, std::span<const double> phi, int d, int m,
                                 double s, bool centered_only) {
  const auto& g = geom.grid;
  const double o = d == 0 ? g.origin.x : g.origin.y;
  const int lc = static_cast<int>(std::floor((s - o) / g.h));
  constexpr int kReach = 6;
  std::array<std::pair<double, double>, 2> pts{};
  int found = 0;
  // Visit cells by increasing distance from s.
  std::vector<std::pair<double, int>> order;
  for (int l = lc - kReach; l <= lc + kReach; ++l) {
    order.emplace_back(std::abs(o + (l + 0.5) * g.h - s), l);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [dist, l] : order) {
    const int i = d == 0 ? l : m, j = d == 0 ? m : l;
    if (!geom.has_row(i, j)) continue;
    const auto v = cell_derivative(geom, phi, i, j, d, centered_only);
    if (!v) continue;
    pts[found++] = {o + (l + 0.5) * g.h, *v};
    if (found == 2) break;
  }
  if (found < 2) return std::nullopt;
  return linear_through(pts[0].first, pts[0].second, pts[1].first, pts[1].second, s);
}

std::optional<double> point_component(const EbmGeometry& geom, std::span<const double> phi, int d,
                                      Point2 p, bool centered_only) {
  const auto& g = geom.grid;
  const double s = d == 0 ? p.x : p.y;       // along the lines
  const double t = d == 0 ? p.y : p.x;       // across the lines
  const double ot = d == 0 ? g.origin.y : g.origin.x;
  const int m0 = static_cast<int>(std::floor((t - ot) / g.h - 0.5));
  std::vector<std::pair<double, int>> lines;
  for (int m = m0 - 3; m <= m0 + 4; ++m) {
    if (m < 0 || m >= g.n) continue;
    lines.emplace_back(std::abs(ot + (m + 0.5) * g.h - t), m);
  }
  std::sort(lines.begin(), lines.end());
  std::array<std::pair<double, double>, 2> vals{};
  int found = 0;
  for (const auto& [dist, m] : lines) {
    const auto v = line_value(geom, phi, d, m, s, centered_only);
    if (!v) continue;
    vals[found++] = {ot + (m + 0.5) * g.h, *v};
    if (found == 2) break;
  }
  if (found < 2) return std::nullopt;
  return linear_through(vals[0].first, vals[0].second, vals[1].first, vals[1].second, t);
}

}  // namespace

Vec2 boundary_gradient(const EbmGeometry& geom, std::span<const double> potential, Point2 p) {
  std::array<double, 2> g{};
  for (int d = 0; d < 2; ++d) {
    auto v = point_component(geom, potential, d, p, true);
    if (!v) v = point_component(geom, potential, d, p, false);
    if (!v) throw StencilUnavailable("not enough potentials near a boundary point; refine the grid");
    g[d] = *v;
  }
  return {g[0], g[1]};
}

EbmSolution recover_gradients(const EbmGeometry& geom, std::vector<double> potential) {
  EbmSolution sol;
  const std::size_t nrow = geom.unknowns();
  if (potential.size() != nrow) throw InvalidArgument("potential size mismatch");
  sol.grad.resize(nrow);
  bool missing = false;
#pragma omp parallel for schedule(static) reduction(|| : missing)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(nrow); ++r) {
    const auto [i, j] = cell_ij(geom.grid, geom.row_cell[static_cast<std::size_t>(r)]);
    const auto gx = cell_derivative(geom, potential, i, j, 0, false);
    const auto gy = cell_derivative(geom, potential, i, j, 1, false);
    if (gx && gy) {
      sol.grad[static_cast<std::size_t>(r)] = {*gx, *gy};
      continue;
    }
    const auto fit = fitted_gradient(geom, potential, i, j);
    if (!fit) {
      missing = true;
      continue;
    }
    sol.grad[static_cast<std::size_t>(r)] = {gx ? gx.value() : fit->x, gy ? gy.value() : fit->y};
  }
  if (missing) throw StencilUnavailable("too few potentials around a cell to recover its gradient");

  for (std::size_t r = 0; r < nrow; ++r) {
    const std::size_t cell = geom.row_cell[r];
    const auto pid = geom.partial_id[cell];
    if (pid < 0) continue;
    const Point2 b = geom.partial[static_cast<std::size_t>(pid)].chord_mid;
    sol.boundary.push_back({b, cell, boundary_gradient(geom, potential, b)});
  }
  sol.potential = std::move(potential);
  return sol;
}

EbmRun solve_ebm(const EbmGeometry& geom, const ExactField& exact, double rel_tol,
                 std::size_t max_iter) {
  EbmRun run;
  run.system = assemble_ebm(geom, exact);
  const auto ilu = sparse::ilu0_factorize(run.system.matrix);
  auto res = sparse::bicgstab(run.system.matrix, ilu, run.system.rhs, rel_tol, max_iter);
  run.report = res.report;
  run.solution = recover_gradients(geom, std::move(res.x));
  return run;
}

void write_grid_file(std::ostream& os, const EbmGeometry& geom, const EbmSolution& sol) {
  os.precision(17);
  const auto& g = geom.grid;
  for (int j = 0; j < g.n; ++j) {
    for (int i = 0; i < g.n; ++i) {
      const auto idx = g.cell_index(i, j);
      os << i << ' ' << j << ' ' << to_string(geom.cls[idx]) << ' ';
      if (geom.row[idx] >= 0) {
        const Vec2 gr = sol.grad[static_cast<std::size_t>(geom.row[idx])];
        os << gr.x << ' ' << gr.y << '\n';
      } else {
        os << "nan nan\n";
      }
    }
  }
}

}  // namespace ebmfem::ebm
