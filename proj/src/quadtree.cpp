#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>

#include "ebmfem/errors.hpp"
#include "ebmfem/qtmesh.hpp"

namespace ebmfem::qt {

namespace {

bool crosses_boundary(const ImplicitBoundary& b, Point2 lo, double size) {
  const Point2 c = lo + Point2{0.5 * size, 0.5 * size};
  const double lc = level(b, c);
  if (provably_far(b, lc, lc, 0.5 * std::sqrt(2.0) * size)) return false;
  constexpr int kSamples = 9;
  bool any_in = false, any_out = false;
  for (int j = 0; j < kSamples; ++j) {
    for (int i = 0; i < kSamples; ++i) {
      const Point2 p = lo + Point2{size * i / (kSamples - 1), size * j / (kSamples - 1)};
      (level(b, p) < 0.0 ? any_in : any_out) = true;
      if (any_in && any_out) return true;
    }
  }
  return false;
}

}  // namespace

std::uint64_t Quadtree::key(int level, std::int64_t ix, std::int64_t iy) {
  return (static_cast<std::uint64_t>(level) << 58) | (static_cast<std::uint64_t>(ix) << 29) |
         static_cast<std::uint64_t>(iy);
}

Quadtree Quadtree::build(const ImplicitBoundary& boundary, int min_level, int max_level) {
  boundary.validate();
  if (min_level <= 0 || max_level < min_level || max_level > 15)
    throw InvalidArgument("quadtree levels must satisfy 0 < min_level <= max_level <= 15");
  Quadtree t;
  t.min_level_ = min_level;
  t.max_level_ = max_level;
  t.nodes_.push_back(Quadrant{});
  t.index_[key(0, 0, 0)] = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Quadrant q = t.node(id);
    bool refine = q.level < min_level;
    if (!refine && q.level < max_level)
      refine = crosses_boundary(boundary, t.lower_corner(q), size(q.level));
    if (!refine) continue;
    t.split(id);
    for (int c : t.node(id).child) stack.push_back(c);
  }
  t.balance();
  return t;
}

Quadtree Quadtree::uniform(int level) {
  if (level < 0 || level > 15) throw InvalidArgument("uniform quadtree level out of range");
  Quadtree t;
  t.min_level_ = level;
  t.max_level_ = level;
  t.nodes_.push_back(Quadrant{});
  t.index_[key(0, 0, 0)] = 0;
  for (std::size_t i = 0; i < t.nodes_.size(); ++i)
    if (t.nodes_[i].level < level) t.split(static_cast<int>(i));
  return t;
}

void Quadtree::split(int id) {
  if (!node(id).is_leaf()) return;
  const Quadrant q = node(id);
  for (int c = 0; c < 4; ++c) {
    Quadrant ch;
    ch.level = q.level + 1;
    ch.ix = 2 * q.ix + (c & 1);
    ch.iy = 2 * q.iy + (c >> 1);
    ch.parent = id;
    const int cid = static_cast<int>(nodes_.size());
    nodes_.push_back(ch);
    index_[key(ch.level, ch.ix, ch.iy)] = cid;
    node(id).child[static_cast<std::size_t>(c)] = cid;
  }
  max_level_ = std::max(max_level_, q.level + 1);
}

void Quadtree::balance() {
  std::deque<int> work;
  for (int id : leaves()) work.push_back(id);
  static constexpr int kDir[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  while (!work.empty()) {
    const int id = work.front();
    work.pop_front();
    const Quadrant q = node(id);
    if (!q.is_leaf() || q.level < 2) continue;
    for (const auto& d : kDir) {
      const int nb = find_covering(q.level, q.ix + d[0], q.iy + d[1]);
      if (nb < 0) continue;
      if (node(nb).is_leaf() && node(nb).level < q.level - 1) {
        split(nb);
        for (int c : node(nb).child) work.push_back(c);
        work.push_back(id);
      }
    }
  }
}

std::vector<int> Quadtree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  return out;
}

Point2 Quadtree::lower_corner(const Quadrant& q) const {
  const double s = size(q.level);
  return {-1.0 + s * static_cast<double>(q.ix), -1.0 + s * static_cast<double>(q.iy)};
}

Point2 Quadtree::center(const Quadrant& q) const {
  const double s = size(q.level);
  return lower_corner(q) + Point2{0.5 * s, 0.5 * s};
}

int Quadtree::find(int level, std::int64_t ix, std::int64_t iy) const {
  const std::int64_t n = std::int64_t{1} << level;
  if (ix < 0 || iy < 0 || ix >= n || iy >= n) return -1;
  const auto it = index_.find(key(level, ix, iy));
  return it == index_.end() ? -1 : it->second;
}

int Quadtree::find_covering(int level, std::int64_t ix, std::int64_t iy) const {
  const std::int64_t n = std::int64_t{1} << level;
  if (ix < 0 || iy < 0 || ix >= n || iy >= n) return -1;
  for (int l = level; l >= 0; --l) {
    const int id = find(l, ix >> (level - l), iy >> (level - l));
    if (id >= 0) return id;
  }
  return -1;
}

int Quadtree::find_leaf(Point2 p) const {
  if (nodes_.empty() || !(p.x >= -1.0 && p.x <= 1.0 && p.y >= -1.0 && p.y <= 1.0)) return -1;
  int id = 0;
  while (!node(id).is_leaf()) {
    const Point2 c = center(node(id));
    const int cx = p.x >= c.x ? 1 : 0;
    const int cy = p.y >= c.y ? 1 : 0;
    id = node(id).child[static_cast<std::size_t>(cx + 2 * cy)];
  }
  return id;
}

int Quadtree::max_neighbor_level_jump() const {
  int worst = 0;
  static constexpr int kDir[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (int id : leaves()) {
    const Quadrant& q = node(id);
    for (const auto& d : kDir) {
      const int nb = find_covering(q.level, q.ix + d[0], q.iy + d[1]);
      if (nb >= 0) worst = std::max(worst, q.level - node(nb).level);
    }
  }
  return worst;
}

}  // namespace ebmfem::qt
