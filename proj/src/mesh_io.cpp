#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ebmfem/errors.hpp"
#include "ebmfem/qtmesh.hpp"

namespace ebmfem::qt {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os << mesh.vertices.size() << ' ' << mesh.triangles.size() << ' ' << mesh.edges.size() << '\n';
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    os << g17(mesh.vertices[v].x) << ' ' << g17(mesh.vertices[v].y) << ' ' << int(mesh.boundary_vertex[v]) << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.edges) os << e.v0 << ' ' << e.v1 << ' ' << e.left << ' ' << e.right << '\n';
}

TriMesh read_mesh(std::istream& is) {
  std::size_t nv = 0, nt = 0, ne = 0;
  if (!(is >> nv >> nt >> ne)) throw InvalidArgument("mesh file: bad header");
  TriMesh mesh;
  mesh.vertices.resize(nv);
  mesh.boundary_vertex.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    std::string x, y;
    int flag = 0;
    if (!(is >> x >> y >> flag)) throw InvalidArgument("mesh file: truncated vertex list");
    mesh.vertices[v] = {std::stod(x), std::stod(y)};
    mesh.boundary_vertex[v] = flag ? 1 : 0;
  }
  mesh.triangles.resize(nt);
  for (auto& t : mesh.triangles) {
    if (!(is >> t[0] >> t[1] >> t[2])) throw InvalidArgument("mesh file: truncated triangle list");
    for (int v : t)
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw InvalidArgument("mesh file: vertex index out of range");
  }
  mesh.build_topology();
  if (mesh.edges.size() != ne) throw InvalidArgument("mesh file: edge count disagrees with triangles");
  for (std::size_t e = 0; e < ne; ++e) {
    MeshEdge rec;
    if (!(is >> rec.v0 >> rec.v1 >> rec.left >> rec.right)) throw InvalidArgument("mesh file: truncated edge list");
    const MeshEdge& got = mesh.edges[e];
    if (rec.v0 != got.v0 || rec.v1 != got.v1 || rec.left != got.left || rec.right != got.right)
      throw InvalidArgument("mesh file: edge " + std::to_string(e) + " disagrees with triangles");
  }
  return mesh;
}

}  // namespace ebmfem::qt
