#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "ebmfem/errors.hpp"
#include "ebmfem/mfem.hpp"

namespace ebmfem::mfem {

SpaceInfo space_info(FluxSpace s) {
  switch (s) {
    case FluxSpace::RT0: return {"rt0", 3, 1, 1, 1};
    case FluxSpace::BDM1: return {"bdm1", 6, 1, 2, 2};
    case FluxSpace::RT1: return {"rt1", 8, 3, 2, 2};
    case FluxSpace::BDM2: return {"bdm2", 12, 3, 3, 3};
  }
  throw InvalidArgument("unknown flux space");
}

std::string to_string(FluxSpace s) { return space_info(s).name; }

FluxSpace parse_space(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  for (FluxSpace s : kAllSpaces)
    if (t == space_info(s).name) return s;
  throw InvalidArgument("unknown flux space '" + std::string(text) + "'");
}

const std::vector<TriangleQuadPoint>& triangle_rule() {
  static const std::vector<TriangleQuadPoint> rule = [] {
    std::vector<TriangleQuadPoint> r;
    auto orbit3 = [&r](double a, double b, double w) {
      r.push_back({{b, b}, 0.5 * w});
      r.push_back({{a, b}, 0.5 * w});
      r.push_back({{b, a}, 0.5 * w});
    };
    auto orbit6 = [&r](double a, double b, double c, double w) {
      const double p[6][2] = {{a, b}, {b, a}, {a, c}, {c, a}, {b, c}, {c, b}};
      for (const auto& q : p) r.push_back({{q[0], q[1]}, 0.5 * w});
    };
    // Dunavant degree 6; barycentric orbits, weights normalized to 1.
    orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379);
    orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207);
    orbit6(0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374);
    return r;
  }();
  return rule;
}

const std::array<LineQuadPoint, 3>& line_rule() {
  static const std::array<LineQuadPoint, 3> rule = [] {
    const double d = 0.5 * std::sqrt(0.6);
    return std::array<LineQuadPoint, 3>{{{0.5 - d, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + d, 5.0 / 18.0}}};
  }();
  return rule;
}

double legendre(int k, double t) {
  switch (k) {
    case 0: return 1.0;
    case 1: return 2.0 * t - 1.0;
    case 2: return 6.0 * t * t - 6.0 * t + 1.0;
  }
  throw InvalidArgument("legendre degree must be 0..2");
}

Point2 ReferenceElement::vertex(int k) {
  static constexpr Point2 v[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  return v[k];
}

Point2 ReferenceElement::edge_point(int e, double t) { return lerp(vertex((e + 1) % 3), vertex((e + 2) % 3), t); }

Vec2 ReferenceElement::edge_normal(int e) {
  const Vec2 d = vertex((e + 2) % 3) - vertex((e + 1) % 3);
  return {d.y, -d.x};
}

Vec2 ReferenceElement::eval(const Generator& g, Point2 xh) const {
  Vec2 v{};
  for (const Term& t : g) {
    const double m = std::pow(xh.x, t.px) * std::pow(xh.y, t.py);
    (t.component == 0 ? v.x : v.y) += m;
  }
  return v;
}

double ReferenceElement::div(const Generator& g, Point2 xh) const {
  double d = 0.0;
  for (const Term& t : g) {
    if (t.component == 0 && t.px > 0) d += t.px * std::pow(xh.x, t.px - 1) * std::pow(xh.y, t.py);
    if (t.component == 1 && t.py > 0) d += t.py * std::pow(xh.x, t.px) * std::pow(xh.y, t.py - 1);
  }
  return d;
}

ReferenceElement::ReferenceElement(FluxSpace space) : space_(space) {
  const SpaceInfo info = space_info(space);
  nf_ = info.flux_dofs;
  np_ = info.potential_dofs;
  m_ = info.multipliers_per_edge;

  auto full_degree = [this](int deg) {
    for (int c = 0; c < 2; ++c)
      for (int d = 0; d <= deg; ++d)
        for (int py = 0; py <= d; ++py) span_.push_back({{c, d - py, py}});
  };
  switch (space) {
    case FluxSpace::RT0:
      full_degree(0);
      span_.push_back({{0, 1, 0}, {1, 0, 1}});
      break;
    case FluxSpace::BDM1: full_degree(1); break;
    case FluxSpace::RT1:
      full_degree(1);
      span_.push_back({{0, 2, 0}, {1, 1, 1}});
      span_.push_back({{0, 1, 1}, {1, 0, 2}});
      break;
    case FluxSpace::BDM2: full_degree(2); break;
  }

  // V(i, j) = dof_i(span_j); shapes are the columns of V^{-1}.
  Eigen::MatrixXd V(nf_, nf_);
  coeff_ = Eigen::MatrixXd::Identity(nf_, nf_);
  for (int j = 0; j < nf_; ++j) {
    const Generator& g = span_[static_cast<std::size_t>(j)];
    for (int i = 0; i < nf_; ++i) V(i, j) = apply_dof(i, [&](Point2 x) { return eval(g, x); });
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
  if (!lu.isInvertible()) throw SingularLocalSystem("flux dof functionals are not unisolvent");
  coeff_ = lu.inverse();
}

double ReferenceElement::apply_dof(int i, const std::function<Vec2(Point2)>& s) const {
  if (i < 3 * m_) {
    const int e = i / m_, k = i % m_;
    const Vec2 n = edge_normal(e);
    double acc = 0.0;
    for (const auto& q : line_rule()) acc += q.w * dot(s(edge_point(e, q.t)), n) * legendre(k, q.t);
    return acc;
  }
  const int j = i - 3 * m_;
  double acc = 0.0;
  for (const auto& q : triangle_rule()) {
    const Vec2 v = s(q.x);
    const Vec2 w = j == 0 ? Vec2{1.0, 0.0} : j == 1 ? Vec2{0.0, 1.0} : Vec2{-q.x.y, q.x.x};
    acc += q.w * dot(v, w);
  }
  return acc;
}

void ReferenceElement::flux(Point2 xh, std::vector<Vec2>& out) const {
  out.assign(static_cast<std::size_t>(nf_), Vec2{});
  for (int l = 0; l < nf_; ++l) {
    const Vec2 g = eval(span_[static_cast<std::size_t>(l)], xh);
    for (int j = 0; j < nf_; ++j) {
      const double c = coeff_(l, j);
      out[static_cast<std::size_t>(j)] = out[static_cast<std::size_t>(j)] + c * g;
    }
  }
}

void ReferenceElement::divergence(Point2 xh, std::vector<double>& out) const {
  out.assign(static_cast<std::size_t>(nf_), 0.0);
  for (int l = 0; l < nf_; ++l) {
    const double d = div(span_[static_cast<std::size_t>(l)], xh);
    if (d == 0.0) continue;
    for (int j = 0; j < nf_; ++j) out[static_cast<std::size_t>(j)] += coeff_(l, j) * d;
  }
}

void ReferenceElement::potential(Point2 xh, std::vector<double>& out) const {
  if (np_ == 1) {
    out.assign(1, 1.0);
    return;
  }
  out = {1.0 - xh.x - xh.y, xh.x, xh.y};
}

const ReferenceElement& reference_element(FluxSpace space) {
  static const std::array<ReferenceElement, 4> elements{ReferenceElement(FluxSpace::RT0),
                                                         ReferenceElement(FluxSpace::BDM1),
                                                         ReferenceElement(FluxSpace::RT1),
                                                         ReferenceElement(FluxSpace::BDM2)};
  return elements[static_cast<std::size_t>(space)];
}

}  // namespace ebmfem::mfem
