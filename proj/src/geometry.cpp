#include "ebmfem/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numbers>
#include <vector>

#include "ebmfem/errors.hpp"

namespace ebmfem {

void ImplicitBoundary::validate() const {
  if (!(r0 > 0.0) || !(eps >= 0.0) || !(eps < r0) || k < 0 || !std::isfinite(center.x) ||
      !std::isfinite(center.y)) {
    throw InvalidArgument("boundary parameters must satisfy 0 <= eps < r0 and k >= 0");
  }
}

double ImplicitBoundary::radius(double theta) const {
  const double c = std::cos(k * theta);
  switch (kind) {
    case BoundaryKind::PerturbedCircle:
      return r0 + eps * c;
    case BoundaryKind::StarBoundary:
      return r0 + eps * c * c * c;
  }
  return r0;
}

double ImplicitBoundary::radius_derivative(double theta) const {
  const double c = std::cos(k * theta);
  const double s = std::sin(k * theta);
  switch (kind) {
    case BoundaryKind::PerturbedCircle:
      return -eps * k * s;
    case BoundaryKind::StarBoundary:
      return -3.0 * eps * k * c * c * s;
  }
  return 0.0;
}

double ImplicitBoundary::lipschitz_bound() const {
  const double dr = (kind == BoundaryKind::StarBoundary ? 3.0 : 1.0) * eps * k;
  const double rho_min = 0.5 * (r0 - eps);
  return std::sqrt(1.0 + (dr / rho_min) * (dr / rho_min));
}

ImplicitBoundary test_boundary_1() {
  return {BoundaryKind::PerturbedCircle, 0.5, 0.05, 5, {0.0, 0.0}};
}

ImplicitBoundary test_boundary_2() {
  return {BoundaryKind::PerturbedCircle, 0.45, 0.12, 7, {0.0, 0.0}};
}

namespace {

double parse_double(std::string_view tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw InvalidArgument("malformed number in boundary spec: '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

ImplicitBoundary parse_boundary(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ','; };
  while (i < text.size()) {
    while (i < text.size() && is_sep(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_sep(text[j])) ++j;
    if (j > i) tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  if (tokens.size() != 6) {
    throw InvalidArgument("boundary spec needs 6 fields: kind r0 epsilon k center_x center_y");
  }
  ImplicitBoundary b;
  if (tokens[0] == "PerturbedCircle") {
    b.kind = BoundaryKind::PerturbedCircle;
  } else if (tokens[0] == "StarBoundary") {
    b.kind = BoundaryKind::StarBoundary;
  } else {
    throw InvalidArgument("unknown boundary kind '" + std::string(tokens[0]) + "'");
  }
  b.r0 = parse_double(tokens[1]);
  b.eps = parse_double(tokens[2]);
  const double k = parse_double(tokens[3]);
  if (k != std::floor(k)) throw InvalidArgument("lobe count must be an integer");
  b.k = static_cast<int>(k);
  b.center = {parse_double(tokens[4]), parse_double(tokens[5])};
  b.validate();
  return b;
}

std::string format_boundary(const ImplicitBoundary& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s %.17g %.17g %d %.17g %.17g",
                b.kind == BoundaryKind::PerturbedCircle ? "PerturbedCircle" : "StarBoundary", b.r0,
                b.eps, b.k, b.center.x, b.center.y);
  return buf;
}

double level(const ImplicitBoundary& b, Point2 p) {
  const Vec2 d = p - b.center;
  const double rho = norm(d);
  return rho - b.radius(std::atan2(d.y, d.x));
}

Vec2 level_gradient(const ImplicitBoundary& b, Point2 p) {
  const Vec2 d = p - b.center;
  const double rho2 = d.x * d.x + d.y * d.y;
  const double rho = std::sqrt(rho2);
  if (rho == 0.0) return {0.0, 0.0};
  const double dr = b.radius_derivative(std::atan2(d.y, d.x));
  // grad rho = d / rho, grad theta = (-dy, dx) / rho^2
  return {d.x / rho + dr * d.y / rho2, d.y / rho - dr * d.x / rho2};
}

std::optional<double> segment_intersection_param(const ImplicitBoundary& b, Point2 p0, Point2 p1,
                                                 double tol) {
  double f0 = level(b, p0);
  const double f1 = level(b, p1);
  const bool in0 = f0 < 0.0;
  const bool in1 = f1 < 0.0;
  if (in0 == in1) return std::nullopt;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const bool in_mid = level(b, lerp(p0, p1, mid)) < 0.0;
    if (in_mid == in0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::optional<Point2> segment_intersection(const ImplicitBoundary& b, Point2 p0, Point2 p1,
                                           double tol) {
  auto t = segment_intersection_param(b, p0, p1, tol);
  if (!t) return std::nullopt;
  return lerp(p0, p1, *t);
}

EdgeCut sample_edge_cut(const ImplicitBoundary& b, Point2 p0, Point2 p1, double max_area_fraction,
                        int samples) {
  std::vector<double> lv(static_cast<std::size_t>(samples) + 2);
  for (int s = 0; s <= samples + 1; ++s) lv[s] = level(b, lerp(p0, p1, double(s) / (samples + 1)));
  int changes = 0;
  for (std::size_t s = 1; s < lv.size(); ++s) {
    if ((lv[s] < 0.0) != (lv[s - 1] < 0.0)) ++changes;
  }
  if (changes <= 1) return EdgeCut::Clean;
  if (changes > 2 || (lv.front() < 0.0) != (lv.back() < 0.0)) return EdgeCut::Violation;
  const bool outer = lv.front() < 0.0;
  const double len = norm(p1 - p0);
  const double ds = len / (samples + 1);
  double area = 0.0;
  for (double l : lv) {
    if ((l < 0.0) != outer) area += std::abs(l) * ds;
  }
  // The flipped run spans one more sample interval than it has samples.
  return area * 1.5 <= max_area_fraction * len * len ? EdgeCut::Sliver : EdgeCut::Violation;
}

bool provably_far(const ImplicitBoundary& b, double l0, double l1, double len) {
  const double lip = b.lipschitz_bound();
  return lip * len < 0.5 * (b.r0 - b.eps) && std::min(std::abs(l0), std::abs(l1)) > lip * len;
}

Vec2 outward_normal(const ImplicitBoundary& b, Point2 p) {
  const Vec2 g = level_gradient(b, p);
  const double n = norm(g);
  if (n < 1e-14) throw DegenerateGradient("level gradient vanishes");
  return (1.0 / n) * g;
}

Point2 project_to_boundary(const ImplicitBoundary& b, Point2 p) {
  const Vec2 d = p - b.center;
  const double rho = norm(d);
  if (rho == 0.0) return b.center + Point2{b.radius(0.0), 0.0};
  const double r = b.radius(std::atan2(d.y, d.x));
  return b.center + (r / rho) * d;
}

ExactValues exact_eval(Point2 p) {
  const double r2 = p.x * p.x + p.y * p.y;
  const double phi = std::exp(0.5 * r2);
  return {phi, {p.x * phi, p.y * phi}, (2.0 + r2) * phi};
}

ExactField manufactured_field() {
  return {[](Point2 p) { return exact_eval(p).phi; }, [](Point2 p) { return exact_eval(p).grad; },
          [](Point2 p) { return exact_eval(p).f; }};
}

ExactField linear_field(double a, double b, double c) {
  return {[=](Point2 p) { return a * p.x + b * p.y + c; }, [=](Point2) { return Vec2{a, b}; },
          [](Point2) { return 0.0; }};
}

ExactField quadratic_field() {
  return {[](Point2 p) { return p.x * p.x + p.y * p.y; },
          [](Point2 p) { return Vec2{2.0 * p.x, 2.0 * p.y}; }, [](Point2) { return 4.0; }};
}

double neumann_g(const ImplicitBoundary& b, Point2 p) {
  return dot(outward_normal(b, p), exact_eval(p).grad);
}

}  // namespace ebmfem
