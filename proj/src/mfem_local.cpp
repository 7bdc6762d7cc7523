#include <cmath>
#include <vector>

#include "ebmfem/errors.hpp"
#include "ebmfem/mfem.hpp"

namespace ebmfem::mfem {

ElementMap ElementMap::make(const std::array<Point2, 3>& v) {
  ElementMap m;
  m.v0 = v[0];
  m.J << v[1].x - v[0].x, v[2].x - v[0].x, v[1].y - v[0].y, v[2].y - v[0].y;
  m.det = m.J.determinant();
  if (!(m.det > 0.0)) throw InvertedElement("element with non-positive Jacobian");
  return m;
}

Point2 ElementMap::to_physical(Point2 xh) const {
  return {v0.x + J(0, 0) * xh.x + J(0, 1) * xh.y, v0.y + J(1, 0) * xh.x + J(1, 1) * xh.y};
}

Point2 ElementMap::to_reference(Point2 x) const {
  const Vec2 d = x - v0;
  return {(J(1, 1) * d.x - J(0, 1) * d.y) / det, (-J(1, 0) * d.x + J(0, 0) * d.y) / det};
}

Vec2 ElementMap::piola(Vec2 sh) const {
  return {(J(0, 0) * sh.x + J(0, 1) * sh.y) / det, (J(1, 0) * sh.x + J(1, 1) * sh.y) / det};
}

LocalMatrices local_matrices(FluxSpace space, const std::array<Point2, 3>& v,
                             const std::array<int, 3>& orientation,
                             const std::function<double(Point2)>& f) {
  const ReferenceElement& ref = reference_element(space);
  const ElementMap map = ElementMap::make(v);
  const int nf = ref.flux_dofs(), np = ref.potential_dofs(), m = ref.multipliers();
  LocalMatrices lm;
  lm.A = Eigen::MatrixXd::Zero(nf, nf);
  lm.B = Eigen::MatrixXd::Zero(np, nf);
  lm.C = Eigen::MatrixXd::Zero(3 * m, nf);
  lm.F = Eigen::VectorXd::Zero(np);

  std::vector<Vec2> s;
  std::vector<double> d, pv;
  Eigen::MatrixXd S(2, nf);
  for (const auto& q : triangle_rule()) {
    ref.flux(q.x, s);
    ref.divergence(q.x, d);
    ref.potential(q.x, pv);
    for (int j = 0; j < nf; ++j) {
      S(0, j) = s[static_cast<std::size_t>(j)].x;
      S(1, j) = s[static_cast<std::size_t>(j)].y;
    }
    const Eigen::MatrixXd JS = map.J * S;
    lm.A.noalias() += (q.w / map.det) * (JS.transpose() * JS);
    const double fx = f ? f(map.to_physical(q.x)) : 0.0;
    for (int a = 0; a < np; ++a) {
      const double va = pv[static_cast<std::size_t>(a)];
      for (int j = 0; j < nf; ++j) lm.B(a, j) += q.w * d[static_cast<std::size_t>(j)] * va;
      lm.F(a) += q.w * map.det * fx * va;
    }
  }
  lm.A = 0.5 * (lm.A + lm.A.transpose()).eval();
  for (int e = 0; e < 3; ++e)
    for (int k = 0; k < m; ++k) lm.C(e * m + k, e * m + k) = (orientation[static_cast<std::size_t>(e)] < 0 && k % 2 == 1) ? -1.0 : 1.0;
  return lm;
}

namespace {

struct Split {
  std::vector<int> free, fixed;
};

Split split_dofs(int nf, int m, const ElementBoundaryData& bd) {
  Split sp;
  for (int i = 0; i < nf; ++i) {
    const bool fixed = i < 3 * m && bd.boundary[static_cast<std::size_t>(i / m)];
    (fixed ? sp.fixed : sp.free).push_back(i);
  }
  return sp;
}

struct Saddle {
  Split split;
  Eigen::FullPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd G;   // (nfree + np) x 3m
  Eigen::VectorXd r0;  // nfree + np
};

Saddle factor(const LocalMatrices& lm, const ElementBoundaryData& bd) {
  const int nf = static_cast<int>(lm.A.rows());
  const int np = static_cast<int>(lm.B.rows());
  const int m3 = static_cast<int>(lm.C.rows());
  Saddle sd;
  sd.split = split_dofs(nf, m3 / 3, bd);
  const auto& fr = sd.split.free;
  const auto& fx = sd.split.fixed;
  const int n1 = static_cast<int>(fr.size());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n1 + np, n1 + np);
  sd.G = Eigen::MatrixXd::Zero(n1 + np, m3);
  sd.r0 = Eigen::VectorXd::Zero(n1 + np);
  for (int a = 0; a < n1; ++a) {
    const int i = fr[static_cast<std::size_t>(a)];
    for (int b = 0; b < n1; ++b) S(a, b) = lm.A(i, fr[static_cast<std::size_t>(b)]);
    for (int p = 0; p < np; ++p) {
      S(a, n1 + p) = -lm.B(p, i);
      S(n1 + p, a) = -lm.B(p, i);
    }
    for (int l = 0; l < m3; ++l) sd.G(a, l) = lm.C(l, i);
    for (int j : fx) sd.r0(a) -= lm.A(i, j) * bd.flux(j);
  }
  for (int p = 0; p < np; ++p) {
    sd.r0(n1 + p) = lm.F(p);
    for (int j : fx) sd.r0(n1 + p) += lm.B(p, j) * bd.flux(j);
  }
  sd.lu.compute(S);
  if (sd.lu.rank() < S.rows()) throw SingularLocalSystem("local saddle-point system is rank deficient");
  return sd;
}

}  // namespace

Condensed condense(const LocalMatrices& lm, const ElementBoundaryData& bd) {
  const Saddle sd = factor(lm, bd);
  const Eigen::MatrixXd SG = sd.lu.solve(sd.G);
  const Eigen::VectorXd Sr = sd.lu.solve(sd.r0);
  Condensed c;
  c.H = sd.G.transpose() * SG;
  c.H = 0.5 * (c.H + c.H.transpose()).eval();
  c.h = sd.G.transpose() * Sr;
  return c;
}

ElementSolution recover(const LocalMatrices& lm, const ElementBoundaryData& bd, const Eigen::VectorXd& mu) {
  const Saddle sd = factor(lm, bd);
  const Eigen::VectorXd x = sd.lu.solve(sd.r0 - sd.G * mu);
  const int nf = static_cast<int>(lm.A.rows());
  const int np = static_cast<int>(lm.B.rows());
  const int n1 = static_cast<int>(sd.split.free.size());
  ElementSolution es;
  es.flux = Eigen::VectorXd::Zero(nf);
  for (int a = 0; a < n1; ++a) es.flux(sd.split.free[static_cast<std::size_t>(a)]) = x(a);
  for (int j : sd.split.fixed) es.flux(j) = bd.flux(j);
  es.potential = x.tail(np);
  return es;
}

}  // namespace ebmfem::mfem
