#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace ebmfem {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

using Vec2 = Point2;

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Point2 lerp(Point2 a, Point2 b, double t) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

/// Twice the signed area of triangle abc (positive when counter-clockwise).
inline double orient2(Point2 a, Point2 b, Point2 c) { return cross(b - a, c - a); }

enum class BoundaryKind { PerturbedCircle, StarBoundary };

/// Star-shaped closed curve rho = r(theta) about `center`.
///
/// PerturbedCircle: r(theta) = r0 + eps * cos(k theta).
/// StarBoundary:    r(theta) = r0 + eps * cos(k theta)^3 (sharper lobes).
///
/// The level function is b(p) = rho - r(theta): negative inside.
struct ImplicitBoundary {
  BoundaryKind kind = BoundaryKind::PerturbedCircle;
  double r0 = 0.5;
  double eps = 0.0;
  int k = 0;
  Point2 center{};

  /// Throws InvalidArgument unless 0 <= eps < r0, r0 > 0 and k >= 0.
  void validate() const;

  double radius(double theta) const;
  double radius_derivative(double theta) const;
  /// Upper bound on |grad b| in the band where the boundary lives.
  double lipschitz_bound() const;
};

ImplicitBoundary test_boundary_1();
ImplicitBoundary test_boundary_2();

/// Parses "kind r0 epsilon k center_x center_y" (whitespace or comma
/// separated). kind is PerturbedCircle or StarBoundary.
ImplicitBoundary parse_boundary(std::string_view text);
std::string format_boundary(const ImplicitBoundary& b);

double level(const ImplicitBoundary& b, Point2 p);
Vec2 level_gradient(const ImplicitBoundary& b, Point2 p);

/// Bisection for the boundary crossing on [p0, p1]. Empty when the
/// endpoint signs agree. `tol` is on the segment parameter.
std::optional<Point2> segment_intersection(const ImplicitBoundary& b, Point2 p0, Point2 p1,
                                           double tol = 1e-12);
/// Same, returning the segment parameter in [0, 1].
std::optional<double> segment_intersection_param(const ImplicitBoundary& b, Point2 p0, Point2 p1,
                                                 double tol = 1e-12);

enum class EdgeCut { Clean, Sliver, Violation };

/// Samples the segment at its endpoints and `samples` interior points.
/// Clean: at most one sign change. Sliver: two sign changes with equal
/// endpoint signs and an excursion whose estimated area (relative to
/// `len`^2) is at most `max_area_fraction`; the excursion is dropped by
/// treating the edge as uncut. Violation: anything else.
EdgeCut sample_edge_cut(const ImplicitBoundary& b, Point2 p0, Point2 p1, double max_area_fraction,
                        int samples = 8);

/// True when no zero of the level function can lie within `len` of a
/// point whose level magnitudes are l0 and l1.
bool provably_far(const ImplicitBoundary& b, double l0, double l1, double len);

/// Unit outward normal grad b / |grad b|. Throws DegenerateGradient.
Vec2 outward_normal(const ImplicitBoundary& b, Point2 p);

/// Radial projection toward the star center.
Point2 project_to_boundary(const ImplicitBoundary& b, Point2 p);

/// A smooth field together with its gradient and Laplacian, used as
/// the exact solution that generates f and g.
struct ExactField {
  std::function<double(Point2)> phi;
  std::function<Vec2(Point2)> grad;
  std::function<double(Point2)> laplacian;
};

struct ExactValues {
  double phi;
  Vec2 grad;
  double f;
};

/// phi = exp((x^2 + y^2) / 2), grad = (x, y) phi, f = (2 + x^2 + y^2) phi.
ExactValues exact_eval(Point2 p);
ExactField manufactured_field();
/// Linear field a*x + b*y + c.
ExactField linear_field(double a, double b, double c = 0.0);
/// x^2 + y^2.
ExactField quadratic_field();

/// Neumann data for the manufactured solution: n(p) . grad phi(p).
double neumann_g(const ImplicitBoundary& b, Point2 p);

}  // namespace ebmfem
