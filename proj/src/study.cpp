#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ebmfem/errors.hpp"
#include "ebmfem/qtmesh.hpp"
#include "ebmfem/study.hpp"

namespace ebmfem::study {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int log2_exact(int n) {
  int l = 0;
  while ((1 << l) < n) ++l;
  if ((1 << l) != n) throw InvalidArgument("mesh size " + std::to_string(n) + " is not a power of two");
  return l;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::EBM: return "ebm";
    case Method::RT0: return "rt0";
    case Method::BDM1: return "bdm1";
    case Method::RT1: return "rt1";
    case Method::BDM2: return "bdm2";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Method m : kAllMethods)
    if (t == to_string(m)) return m;
  throw InvalidArgument("unknown method '" + std::string(text) + "'");
}

std::optional<mfem::FluxSpace> flux_space(Method m) {
  switch (m) {
    case Method::EBM: return std::nullopt;
    case Method::RT0: return mfem::FluxSpace::RT0;
    case Method::BDM1: return mfem::FluxSpace::BDM1;
    case Method::RT1: return mfem::FluxSpace::RT1;
    case Method::BDM2: return mfem::FluxSpace::BDM2;
  }
  return std::nullopt;
}

ImplicitBoundary resolve_boundary(std::string_view spec) {
  if (spec == "test1") return test_boundary_1();
  if (spec == "test2") return test_boundary_2();
  if (spec.substr(0, 5) == "file:") {
    const std::string path(spec.substr(5));
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open boundary file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_boundary(ss.str());
  }
  throw InvalidArgument("boundary must be test1, test2 or file:<path>");
}

SampleSet sample_set(const ebm::EbmGeometry& geom) {
  SampleSet s;
  s.n = geom.grid.n;
  const auto n = static_cast<std::size_t>(geom.grid.n);
  for (std::size_t r = 0; r < geom.unknowns(); ++r) {
    const std::size_t cell = geom.row_cell[r];
    const int i = static_cast<int>(cell % n), j = static_cast<int>(cell / n);
    s.points.push_back(geom.grid.center(i, j));
    s.areas.push_back(geom.volume(cell));
    s.cells.push_back({i, j});
    const auto pid = geom.partial_id[cell];
    if (pid >= 0) {
      const auto& pc = geom.partial[static_cast<std::size_t>(pid)];
      s.boundary_points.push_back(pc.chord_mid);
      s.boundary_normals.push_back(pc.chord_normal);
    }
  }
  return s;
}

double gradient_error_norm(std::span<const GradientSample> samples, const std::function<Vec2(Point2)>& exact_grad) {
  double acc = 0.0;
  for (const auto& s : samples) {
    const Vec2 e = s.numeric - exact_grad(s.point);
    acc += s.area * dot(e, e);
  }
  return std::sqrt(acc);
}

double boundary_max_error(std::span<const Point2> points, std::span<const Vec2> numeric,
                          const std::function<Vec2(Point2)>& exact_grad) {
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) worst = std::max(worst, norm(numeric[i] - exact_grad(points[i])));
  return worst;
}

double convergence_ratio(double err_coarse, double err_fine) {
  if (!(err_coarse > 0.0) || !(err_fine > 0.0)) throw InvalidArgument("convergence ratio needs positive errors");
  return std::log2(err_coarse / err_fine);
}

namespace {

// Largest barycentric magnitude of p: how strongly extrapolation out of t
// amplifies the element's error.
double amplification(const qt::TriMesh& mesh, int t, Point2 p) {
  const auto l = mesh.barycentric(static_cast<std::size_t>(t), p);
  return std::max({std::abs(l[0]), std::abs(l[1]), std::abs(l[2])});
}

}  // namespace

// Points outside the mesh are extrapolated from the triangle around the
// blocking one with the smallest amplification.
std::vector<Vec2> mfem_gradient_at(const mfem::FieldSolution& sol, const qt::TriMesh& mesh,
                                   const qt::Quadtree& tree, std::span<const Point2> points) {
  std::vector<std::vector<int>> incident(mesh.vertices.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int v : mesh.triangles[t]) incident[static_cast<std::size_t>(v)].push_back(static_cast<int>(t));

  std::vector<Vec2> out(points.size());
  const auto np = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < np; ++i) {
    const Point2 p = points[static_cast<std::size_t>(i)];
    const qt::Location loc = qt::locate_or_nearest(mesh, tree, p);
    int t = loc.triangle;
    if (!loc.inside) {
      double best = amplification(mesh, t, p);
      for (int v : mesh.triangles[static_cast<std::size_t>(loc.triangle)]) {
        for (int c : incident[static_cast<std::size_t>(v)]) {
          const double q = amplification(mesh, c, p);
          if (q < best) best = q, t = c;
        }
      }
    }
    out[static_cast<std::size_t>(i)] = -1.0 * mfem::eval_flux_in(sol, mesh, t, p);
  }
  return out;
}

namespace {

// Boundary points are nudged 1e-10 inward when they miss the polygon.
std::vector<Point2> nudge_into_mesh(const qt::TriMesh& mesh, const qt::Quadtree& tree, std::span<const Point2> pts,
                                    std::span<const Vec2> normals) {
  std::vector<Point2> out(pts.begin(), pts.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (qt::locate_or_nearest(mesh, tree, out[i]).inside) continue;
    const Point2 q = out[i] - 1e-10 * normals[i];
    if (qt::locate_or_nearest(mesh, tree, q).inside) out[i] = q;
  }
  return out;
}

struct MfemSolve {
  qt::MeshResult mesh;
  mfem::HybridSystem system;
  mfem::FieldSolution solution;
  double residual = 0.0;
  double t_mesh = 0.0, t_solve = 0.0;
};

MfemSolve solve_mfem(mfem::FluxSpace space, const ImplicitBoundary& boundary, int min_level, int max_level,
                     const ExactField& exact, double tol) {
  MfemSolve s;
  auto t0 = Clock::now();
  s.mesh = qt::generate_mesh(boundary, min_level, max_level);
  s.t_mesh = seconds_since(t0);
  t0 = Clock::now();
  s.system = mfem::assemble_hybrid(s.mesh.mesh, space, exact);
  const sparse::Ilu0Factors ilu = sparse::ilu0_factorize(s.system.matrix);
  sparse::SolveResult r = sparse::bicgstab(s.system.matrix, ilu, s.system.rhs, tol, 100000);
  s.residual = sparse::true_relative_residual(s.system.matrix, r.x, s.system.rhs);
  if (s.system.pinned_row >= 0) {
    const int m = mfem::space_info(space).multipliers_per_edge;
    const double shift = s.system.pinned_value - r.x[static_cast<std::size_t>(s.system.pinned_row)];
    for (std::size_t i = 0; i < r.x.size(); i += static_cast<std::size_t>(m)) r.x[i] += shift;
  }
  s.solution = mfem::recover_all(s.mesh.mesh, space, s.system.edge_row, r.x, exact);
  s.solution.report = r.report;
  s.t_solve = seconds_since(t0);
  return s;
}

}  // namespace

RunResult run_single(Method method, const ImplicitBoundary& boundary, int n, const ExactField& exact, double tol) {
  RunResult out;
  out.method = method;
  out.row.size = n;
  auto t0 = Clock::now();
  const ebm::EbmGeometry geom = ebm::build_geometry(ebm::CartesianGrid::make(n), boundary);
  const double t_geom = seconds_since(t0);
  out.samples = sample_set(geom);

  if (method == Method::EBM) {
    out.row.time.mesh = t_geom;
    t0 = Clock::now();
    const ebm::EbmSystem sys = ebm::assemble_ebm(geom, exact);
    const sparse::Ilu0Factors ilu = sparse::ilu0_factorize(sys.matrix);
    sparse::SolveResult r = sparse::bicgstab(sys.matrix, ilu, sys.rhs, tol, 100000);
    out.relative_residual = sparse::true_relative_residual(sys.matrix, r.x, sys.rhs);
    out.hash = sparse::fnv1a(r.x);
    out.row.iterations = r.report.iterations;
    out.row.unknowns = geom.unknowns();
    out.row.time.solve = seconds_since(t0);
    t0 = Clock::now();
    const ebm::EbmSolution sol = ebm::recover_gradients(geom, std::move(r.x));
    out.numeric = sol.grad;
    for (const auto& b : sol.boundary) out.boundary_numeric.push_back(b.grad);
    out.row.time.interp = seconds_since(t0);
  } else {
    const int level = log2_exact(n);
    MfemSolve s = solve_mfem(*flux_space(method), boundary, level, level, exact, tol);
    out.row.time.mesh = s.t_mesh;
    out.row.time.solve = s.t_solve;
    out.relative_residual = s.residual;
    out.hash = sparse::fnv1a(s.solution.multipliers);
    out.row.iterations = s.solution.report.iterations;
    out.row.unknowns = s.system.unknowns();
    t0 = Clock::now();
    out.numeric = mfem_gradient_at(s.solution, s.mesh.mesh, s.mesh.tree, out.samples.points);
    const auto bpts = nudge_into_mesh(s.mesh.mesh, s.mesh.tree, out.samples.boundary_points, out.samples.boundary_normals);
    out.boundary_numeric = mfem_gradient_at(s.solution, s.mesh.mesh, s.mesh.tree, bpts);
    out.row.time.interp = seconds_since(t0);
  }

  std::vector<GradientSample> gs(out.samples.points.size());
  for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = {out.samples.points[i], out.samples.areas[i], out.numeric[i]};
  out.row.error = gradient_error_norm(gs, exact.grad);
  out.boundary_max = boundary_max_error(out.samples.boundary_points, out.boundary_numeric, exact.grad);
  return out;
}

ErrorField error_field(const RunResult& run, const ExactField& exact) {
  ErrorField f;
  f.n = run.samples.n;
  f.cells = run.samples.cells;
  f.error.resize(run.numeric.size());
  for (std::size_t i = 0; i < run.numeric.size(); ++i) f.error[i] = run.numeric[i] - exact.grad(run.samples.points[i]);
  return f;
}

StudyResult run_uniform_study(const StudyConfig& config, const std::function<void(const RunResult&)>& on_row) {
  if (!std::is_sorted(config.sizes.begin(), config.sizes.end()) || config.sizes.empty())
    throw InvalidArgument("mesh sizes must be a non-empty ascending list");
  const ExactField exact = manufactured_field();
  StudyResult res;
  for (int n : config.sizes) {
    RunResult run = run_single(config.method, config.boundary, n, exact, config.tol);
    if (!res.rows.empty()) run.row.ratio = convergence_ratio(res.rows.back().error, run.row.error);
    if (n == config.field_size) res.field = error_field(run, exact);
    res.rows.push_back(run.row);
    if (on_row) on_row(run);
    // Sample data is only needed for the error field; drop it to keep
    // the ladder's footprint small.
    run.samples = {};
    run.numeric.clear();
    run.boundary_numeric.clear();
    res.runs.push_back(std::move(run));
  }
  return res;
}

std::vector<AmrRow> run_amr_study(const AmrConfig& config, const std::function<void(const AmrRow&)>& on_row) {
  const ExactField exact = manufactured_field();
  const SampleSet coarse = sample_set(ebm::build_geometry(ebm::CartesianGrid::make(1 << config.min_level), config.boundary));
  std::vector<AmrRow> rows;
  for (int L : config.max_levels) {
    if (L < config.min_level) throw InvalidArgument("max level below min level");
    AmrRow row;
    row.max_level = L;
    MfemSolve s = solve_mfem(config.space, config.boundary, config.min_level, L, exact, config.tol);
    row.time.mesh = s.t_mesh;
    row.time.solve = s.t_solve;
    row.iterations = s.solution.report.iterations;
    row.unknowns = s.system.unknowns();
    row.relative_residual = s.residual;
    const auto t0 = Clock::now();
    const auto numeric = mfem_gradient_at(s.solution, s.mesh.mesh, s.mesh.tree, coarse.points);
    std::vector<GradientSample> gs(numeric.size());
    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = {coarse.points[i], coarse.areas[i], numeric[i]};
    row.global_error = gradient_error_norm(gs, exact.grad);
    const SampleSet fine =
        L == config.min_level ? coarse : sample_set(ebm::build_geometry(ebm::CartesianGrid::make(1 << L), config.boundary));
    const auto bpts = nudge_into_mesh(s.mesh.mesh, s.mesh.tree, fine.boundary_points, fine.boundary_normals);
    const auto bnum = mfem_gradient_at(s.solution, s.mesh.mesh, s.mesh.tree, bpts);
    row.boundary_max = boundary_max_error(fine.boundary_points, bnum, exact.grad);
    row.time.interp = seconds_since(t0);
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

void write_table_csv(std::ostream& os, std::span<const ConvergenceRow> rows) {
  os << "size,error,ratio,time_mesh,time_solve,time_interp,iterations,unknowns\n";
  for (const auto& r : rows) {
    os << r.size << ',' << g17(r.error) << ',' << (r.ratio ? g17(*r.ratio) : std::string("N/A")) << ','
       << g17(r.time.mesh) << ',' << g17(r.time.solve) << ',' << g17(r.time.interp) << ',' << r.iterations << ','
       << r.unknowns << '\n';
  }
}

std::vector<ConvergenceRow> read_table_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "size,error,ratio,time_mesh,time_solve,time_interp,iterations,unknowns")
    throw InvalidArgument("table.csv: unexpected header");
  std::vector<ConvergenceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 8) throw InvalidArgument("table.csv: expected 8 fields");
    ConvergenceRow r;
    r.size = std::stoi(f[0]);
    r.error = std::stod(f[1]);
    if (f[2] != "N/A") r.ratio = std::stod(f[2]);
    r.time = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
    r.iterations = std::stoull(f[6]);
    r.unknowns = std::stoull(f[7]);
    rows.push_back(r);
  }
  return rows;
}

void write_amr_csv(std::ostream& os, std::span<const AmrRow> rows) {
  os << "max_level,global_error,boundary_max_error,time_mesh,time_solve,time_interp,iterations,unknowns\n";
  for (const auto& r : rows)
    os << r.max_level << ',' << g17(r.global_error) << ',' << g17(r.boundary_max) << ',' << g17(r.time.mesh) << ','
       << g17(r.time.solve) << ',' << g17(r.time.interp) << ',' << r.iterations << ',' << r.unknowns << '\n';
}

void write_error_field(std::ostream& os, const ErrorField& field) {
  for (std::size_t k = 0; k < field.cells.size(); ++k) {
    const Vec2 e = field.error[k];
    os << field.cells[k][0] << ' ' << field.cells[k][1] << ' ' << g17(e.x) << ' ' << g17(e.y) << ' ' << g17(norm(e))
       << '\n';
  }
}

std::uint64_t study_hash(std::span<const RunResult> runs) {
  std::vector<double> bits;
  for (const auto& r : runs) {
    double d;
    static_assert(sizeof d == sizeof r.hash);
    std::memcpy(&d, &r.hash, sizeof d);
    bits.push_back(d);
  }
  return sparse::fnv1a(bits);
}

void emit_outputs(const StudyConfig& config, const StudyResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [](const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw Error("cannot write '" + p.string() + "'");
    return os;
  };
  {
    auto os = open(fs::path(dir) / "table.csv");
    write_table_csv(os, result.rows);
  }
  if (result.field) {
    auto os = open(fs::path(dir) / ("errorfield_" + to_string(config.method) + "_" + std::to_string(result.field->n) + ".grid"));
    write_error_field(os, *result.field);
  }
  nlohmann::json j;
  j["method"] = to_string(config.method);
  j["boundary"] = config.boundary_spec;
  j["boundary_parameters"] = format_boundary(config.boundary);
  j["sizes"] = config.sizes;
  j["tol"] = config.tol;
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(study_hash(result.runs)));
  j["solution_hash"] = hex;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(r.hash));
    runs.push_back({{"size", r.row.size},
                    {"error", r.row.error},
                    {"boundary_max_error", r.boundary_max},
                    {"relative_residual", r.relative_residual},
                    {"iterations", r.row.iterations},
                    {"unknowns", r.row.unknowns},
                    {"hash", hex}});
  }
  j["runs"] = runs;
  auto os = open(fs::path(dir) / "study.json");
  os << j.dump(2) << '\n';
}

}  // namespace ebmfem::study
