#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ebmfem/geometry.hpp"
#include "ebmfem/sparse.hpp"

namespace ebmfem::ebm {

/// Uniform n x n grid over [-1, 1]^2.
struct CartesianGrid {
  int n = 0;
  double h = 0.0;
  Point2 origin{-1.0, -1.0};

  static CartesianGrid make(int n);
  Point2 center(int i, int j) const { return {origin.x + (i + 0.5) * h, origin.y + (j + 0.5) * h}; }
  Point2 vertex(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < n && j < n; }
  std::size_t cell_index(int i, int j) const { return static_cast<std::size_t>(j) * n + i; }
};

enum class CellClass : std::uint8_t { Internal, Partial, External };
enum class EdgeClass : std::uint8_t { Full, Partial, External };

const char* to_string(CellClass c);

/// Faces are numbered 0: -x, 1: +x, 2: -y, 3: +y.
inline constexpr int face_direction(int face) { return face / 2; }
inline constexpr int face_sign(int face) { return face % 2 == 0 ? -1 : 1; }

struct EdgeGeom {
  EdgeClass cls = EdgeClass::External;
  Point2 center{};
  double length = 0.0;
};

struct PartialCellGeom {
  double volume = 0.0;
  Point2 centroid{};
  std::array<EdgeGeom, 4> edges{};
  Point2 chord_a{}, chord_b{};
  Point2 chord_mid{};
  double chord_length = 0.0;
  Vec2 chord_normal{};
  std::vector<Point2> polygon;  // counter-clockwise
};

/// Small-cell threshold as a fraction of h^2.
inline constexpr double kDefaultMinVolumeFraction = 0.01;

/// Classification plus cut-cell geometry for one grid and boundary.
/// With no boundary the domain is the whole grid box and every cell is
/// internal.
struct EbmGeometry {
  CartesianGrid grid;
  std::optional<ImplicitBoundary> boundary;
  double min_volume_fraction = kDefaultMinVolumeFraction;
  std::vector<CellClass> cls;            // per cell
  std::vector<std::int32_t> row;         // per cell, -1 when external
  std::vector<std::int32_t> partial_id;  // per cell, -1 unless partial
  std::vector<PartialCellGeom> partial;
  std::vector<std::size_t> row_cell;     // row -> cell index
  std::size_t adjusted_cells = 0;        // small cells grown to the threshold

  std::size_t unknowns() const { return row_cell.size(); }
  bool has_row(int i, int j) const { return grid.contains(i, j) && row[grid.cell_index(i, j)] >= 0; }
  double volume(std::size_t cell) const;
  /// Centroid of the in-domain part (the cell center for internal cells).
  Point2 centroid(std::size_t cell) const;
};

/// Labels every cell. Throws AssumptionViolation if a cell edge is
/// crossed more than once or a cell is cut into several pieces.
std::vector<CellClass> classify_cells(const CartesianGrid& grid, const ImplicitBoundary& boundary);

/// Geometry of one partial cell computed from its own edge crossings,
/// including the small-cell adjustment.
PartialCellGeom partial_geometry(const CartesianGrid& grid, const ImplicitBoundary& boundary,
                                 int i, int j, double min_volume_fraction = kDefaultMinVolumeFraction);

/// Full classification and geometry with crossings shared between
/// neighbouring cells, so adjusted crossings stay consistent.
EbmGeometry build_geometry(const CartesianGrid& grid, const std::optional<ImplicitBoundary>& boundary,
                           double min_volume_fraction = kDefaultMinVolumeFraction);

/// 3x3 coefficients c[a][b] for cell offset (a-1, b-1) from the anchor.
using StencilCoeffs = std::array<std::array<double, 3>, 3>;

/// Linearly interpolated flux along direction d through the point at
/// offset r from the anchor cell center. Throws InvalidArgument when
/// |r . e_d'| > h/2.
StencilCoeffs flux_stencil(int d, Vec2 r, double h);

struct EbmSystem {
  sparse::CsrMatrix matrix;
  std::vector<double> rhs;
  std::size_t pinned_row = 0;
  double compatibility_shift = 0.0;  // subtracted from every rhs entry
};

/// Finite-volume rows for every internal/partial cell. The pure Neumann
/// nullspace is removed by pinning the internal cell closest to the
/// domain center to the exact potential.
EbmSystem assemble_ebm(const EbmGeometry& geom, const ExactField& exact);

struct BoundaryGradient {
  Point2 point;
  std::size_t cell;
  Vec2 grad;
};

struct EbmSolution {
  std::vector<double> potential;  // per row
  std::vector<Vec2> grad;         // per row, at cell centers
  std::vector<BoundaryGradient> boundary;
};

/// Second-order gradients at every row cell center and at every chord
/// midpoint. Throws StencilUnavailable when the grid is too coarse.
EbmSolution recover_gradients(const EbmGeometry& geom, std::vector<double> potential);

/// Gradient of the potential at an arbitrary point by line
/// extrapolation of centered differences.
Vec2 boundary_gradient(const EbmGeometry& geom, std::span<const double> potential, Point2 p);

struct EbmRun {
  EbmSystem system;
  sparse::SolveReport report;
  EbmSolution solution;
};

EbmRun solve_ebm(const EbmGeometry& geom, const ExactField& exact, double rel_tol = 1e-9,
                 std::size_t max_iter = 50000);

/// One line per cell: "i j class gx gy" (nan for external cells).
void write_grid_file(std::ostream& os, const EbmGeometry& geom, const EbmSolution& sol);

}  // namespace ebmfem::ebm
