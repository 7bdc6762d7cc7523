#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ebmfem/geometry.hpp"
#include "ebmfem/qtmesh.hpp"
#include "ebmfem/sparse.hpp"

namespace ebmfem::mfem {

enum class FluxSpace { RT0, BDM1, RT1, BDM2 };

inline constexpr std::array<FluxSpace, 4> kAllSpaces{FluxSpace::RT0, FluxSpace::BDM1, FluxSpace::RT1,
                                                     FluxSpace::BDM2};

struct SpaceInfo {
  const char* name;
  int flux_dofs;
  int potential_dofs;
  int multipliers_per_edge;
  int flux_order;
};

SpaceInfo space_info(FluxSpace s);
std::string to_string(FluxSpace s);
/// Case-insensitive "rt0", "bdm1", "rt1", "bdm2". Throws InvalidArgument.
FluxSpace parse_space(std::string_view text);

// ----------------------------------------------------------- quadrature

struct TriangleQuadPoint {
  Point2 x;
  double w;  // weights sum to 1/2, the reference area
};
/// Symmetric 12-point rule on the reference triangle, exact to degree 6.
const std::vector<TriangleQuadPoint>& triangle_rule();

struct LineQuadPoint {
  double t;
  double w;  // weights sum to 1
};
/// 3-point Gauss-Legendre on [0, 1], exact to degree 5.
const std::array<LineQuadPoint, 3>& line_rule();

/// Legendre polynomial of degree k (0..2) shifted to [0, 1].
double legendre(int k, double t);

// ---------------------------------------------------- reference element

/// Reference triangle (0,0), (1,0), (0,1). Local edge e is opposite
/// vertex e and runs from vertex e+1 to vertex e+2.
///
/// Flux dofs: edge moments int_e (s . n) P_k ds for k < multipliers_per_edge,
/// numbered e * m + k, followed by interior moments (RT1: against (1,0)
/// and (0,1); BDM2: against (1,0), (0,1) and (-y, x)). Shape functions
/// are the dual basis. Potential shapes are 1 (RT0, BDM1) or the
/// barycentric coordinates (RT1, BDM2).
class ReferenceElement {
 public:
  explicit ReferenceElement(FluxSpace space);

  FluxSpace space() const { return space_; }
  int flux_dofs() const { return nf_; }
  int potential_dofs() const { return np_; }
  int multipliers() const { return m_; }

  void flux(Point2 xh, std::vector<Vec2>& out) const;
  void divergence(Point2 xh, std::vector<double>& out) const;
  void potential(Point2 xh, std::vector<double>& out) const;

  /// Applies dof functional i to an arbitrary reference field.
  double apply_dof(int i, const std::function<Vec2(Point2)>& s) const;

  static Point2 vertex(int k);
  static Point2 edge_point(int e, double t);
  /// Outward normal of edge e scaled by its length.
  static Vec2 edge_normal(int e);

 private:
  struct Term {
    int component;  // 0: x, 1: y
    int px, py;
  };
  using Generator = std::vector<Term>;  // sum of unit-coefficient terms
  Vec2 eval(const Generator& g, Point2 xh) const;
  double div(const Generator& g, Point2 xh) const;

  std::vector<Generator> span_;
  Eigen::MatrixXd coeff_;  // column j: shape j in the span_ basis
  FluxSpace space_;
  int nf_ = 0, np_ = 0, m_ = 0;
};

/// Shared immutable instance per space.
const ReferenceElement& reference_element(FluxSpace space);

// ------------------------------------------------------- element level

/// Affine map x = v0 + J x_hat.
struct ElementMap {
  Point2 v0;
  Eigen::Matrix2d J;
  double det = 0.0;

  /// Throws InvertedElement when det J <= 0.
  static ElementMap make(const std::array<Point2, 3>& v);
  Point2 to_physical(Point2 xh) const;
  Point2 to_reference(Point2 x) const;
  /// Contravariant Piola transform of a reference vector.
  Vec2 piola(Vec2 sh) const;
};

struct LocalMatrices {
  Eigen::MatrixXd A;  // nf x nf, int s_i . s_j
  Eigen::MatrixXd B;  // np x nf, int (div s_j) v_m
  Eigen::MatrixXd C;  // 3m x nf, int_{dK} (s_j . n) mu_k, global edge orientation
  Eigen::VectorXd F;  // np, int f v_m
};

/// `orientation[e]` is +1 when local edge e runs from the lower to the
/// higher global vertex index, -1 otherwise.
LocalMatrices local_matrices(FluxSpace space, const std::array<Point2, 3>& v,
                             const std::array<int, 3>& orientation,
                             const std::function<double(Point2)>& f);

/// Prescribed normal flux on boundary edges: entries at the dofs of
/// edges flagged in `boundary` hold the flux moments, others are unused.
struct ElementBoundaryData {
  std::array<bool, 3> boundary{false, false, false};
  Eigen::VectorXd flux;  // size nf
};

struct Condensed {
  Eigen::MatrixXd H;  // 3m x 3m on local multipliers; rows of boundary edges are zero
  Eigen::VectorXd h;  // 3m
};

/// Eliminates flux and potential dofs: the element contributes
/// H mu = h to the continuity equations. Throws SingularLocalSystem.
Condensed condense(const LocalMatrices& lm, const ElementBoundaryData& bd);

struct ElementSolution {
  Eigen::VectorXd flux;       // nf local dof values
  Eigen::VectorXd potential;  // np
};

/// Back-substitutes flux and potential from local multipliers (3m).
ElementSolution recover(const LocalMatrices& lm, const ElementBoundaryData& bd, const Eigen::VectorXd& mu);

// --------------------------------------------------------- global level

struct HybridSystem {
  FluxSpace space = FluxSpace::RT0;
  sparse::CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<int> edge_row;  // first multiplier row of each edge, -1 on boundary edges
  std::size_t interior_edges = 0;
  int pinned_row = -1;
  double pinned_value = 0.0;  // the row is pinned to 0 and the solution shifted to this mean

  std::size_t unknowns() const { return rhs.size(); }
};

/// Orientation of local edge e of triangle t, see local_matrices.
std::array<int, 3> edge_orientation(const qt::TriMesh& mesh, int t);

/// Boundary flux moments from the exact gradient on the straight edge
/// (q . n = -grad phi . n).
ElementBoundaryData boundary_data(FluxSpace space, const qt::TriMesh& mesh, int t, const ExactField& exact);

/// Assembles the condensed system on interior-edge multipliers and pins
/// the degree-0 multiplier of one interior edge to the edge mean of phi.
/// When `pin` is false the matrix is left singular (for symmetry checks).
HybridSystem assemble_hybrid(const qt::TriMesh& mesh, FluxSpace space, const ExactField& exact, bool pin = true);

struct FieldSolution {
  FluxSpace space = FluxSpace::RT0;
  std::vector<Eigen::VectorXd> flux;
  std::vector<Eigen::VectorXd> potential;
  std::vector<double> multipliers;
  sparse::SolveReport report;
};

/// Solves for the multipliers (BiCGSTAB + ILU(0)) and recovers every
/// element's flux and potential.
FieldSolution solve_and_recover(const qt::TriMesh& mesh, const HybridSystem& system, const ExactField& exact,
                                double tol = 1e-9, std::size_t max_iter = 100000);

/// Recovery only, for given multiplier values.
FieldSolution recover_all(const qt::TriMesh& mesh, FluxSpace space, const std::vector<int>& edge_row,
                          const std::vector<double>& multipliers, const ExactField& exact);

/// Flux of element t at p using its polynomial representation; p need
/// not lie inside t.
Vec2 eval_flux_in(const FieldSolution& sol, const qt::TriMesh& mesh, int t, Point2 p);
double eval_potential_in(const FieldSolution& sol, const qt::TriMesh& mesh, int t, Point2 p);
/// Locates p and evaluates the flux there. Throws OutsideDomain.
Vec2 eval_flux(const FieldSolution& sol, const qt::TriMesh& mesh, const qt::Quadtree& tree, Point2 p);

/// "space ne nm", then one line per element "t c_0 ... c_{nf-1}", then
/// the multiplier vector one value per line.
void write_solution(std::ostream& os, const FieldSolution& sol);

}  // namespace ebmfem::mfem
