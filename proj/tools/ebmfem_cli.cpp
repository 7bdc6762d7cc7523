#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebmfem/errors.hpp"
#include "ebmfem/mfem.hpp"
#include "ebmfem/qtmesh.hpp"
#include "ebmfem/study.hpp"

namespace fs = std::filesystem;
using namespace ebmfem;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots)), hi = std::stoi(text.substr(dots + 2));
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw InvalidArgument("empty integer list '" + text + "'");
  return out;
}

void print_row(const std::string& method, const study::RunResult& r) {
  std::printf("%-5s n=%-4d error=%.6e ratio=%-7s boundary_max=%.6e it=%zu unknowns=%zu time=%.3f/%.3f/%.3f\n",
              method.c_str(), r.row.size, r.row.error,
              r.row.ratio ? std::to_string(*r.row.ratio).substr(0, 5).c_str() : "N/A", r.boundary_max,
              r.row.iterations, r.row.unknowns, r.row.time.mesh, r.row.time.solve, r.row.time.interp);
  std::fflush(stdout);
}

int run_study(const std::string& method, const std::string& boundary, const std::string& sizes, double tol,
              const std::string& out) {
  std::vector<study::Method> methods;
  if (method == "all")
    methods.assign(study::kAllMethods.begin(), study::kAllMethods.end());
  else
    methods.push_back(study::parse_method(method));
  for (study::Method m : methods) {
    study::StudyConfig cfg;
    cfg.method = m;
    cfg.boundary_spec = boundary;
    cfg.boundary = study::resolve_boundary(boundary);
    cfg.sizes = parse_int_list(sizes);
    cfg.tol = tol;
    const std::string dir = methods.size() > 1 ? (fs::path(out) / study::to_string(m)).string() : out;
    fs::create_directories(dir);
    std::vector<study::ConvergenceRow> rows;
    auto flush = [&](const study::RunResult& r) {
      rows.push_back(r.row);
      if (rows.size() > 1) rows.back().ratio = study::convergence_ratio(rows[rows.size() - 2].error, r.row.error);
      std::ofstream os(fs::path(dir) / "table.csv");
      study::write_table_csv(os, rows);
      print_row(study::to_string(m), r);
    };
    const study::StudyResult res = study::run_uniform_study(cfg, flush);
    study::emit_outputs(cfg, res, dir);
  }
  return 0;
}

int run_amr(const std::string& space, int min_level, const std::string& max_levels, const std::string& boundary,
            double tol, const std::string& out) {
  study::AmrConfig cfg;
  cfg.space = mfem::parse_space(space);
  cfg.boundary_spec = boundary;
  cfg.boundary = study::resolve_boundary(boundary);
  cfg.min_level = min_level;
  cfg.max_levels = parse_int_list(max_levels);
  cfg.tol = tol;
  fs::create_directories(out);
  std::vector<study::AmrRow> rows;
  auto flush = [&](const study::AmrRow& r) {
    rows.push_back(r);
    std::ofstream os(fs::path(out) / "amr.csv");
    study::write_amr_csv(os, rows);
    std::printf("level=%-2d global=%.6e boundary_max=%.6e it=%zu unknowns=%zu time=%.3f\n", r.max_level,
                r.global_error, r.boundary_max, r.iterations, r.unknowns, r.time.total());
    std::fflush(stdout);
  };
  study::run_amr_study(cfg, flush);
  nlohmann::json j;
  j["space"] = mfem::to_string(cfg.space);
  j["boundary"] = boundary;
  j["boundary_parameters"] = format_boundary(cfg.boundary);
  j["min_level"] = cfg.min_level;
  j["max_levels"] = cfg.max_levels;
  j["tol"] = tol;
  std::ofstream(fs::path(out) / "amr.json") << j.dump(2) << '\n';
  return 0;
}

int run_mesh(const std::string& boundary, int min_level, int max_level, const std::string& out) {
  const auto r = qt::generate_mesh(study::resolve_boundary(boundary), min_level, max_level);
  std::ofstream os(out);
  if (!os) throw Error("cannot write '" + out + "'");
  qt::write_mesh(os, r.mesh);
  std::printf("vertices=%zu triangles=%zu edges=%zu interior_edges=%zu\n", r.mesh.vertices.size(),
              r.mesh.triangles.size(), r.mesh.edges.size(), r.mesh.interior_edge_count());
  return 0;
}

int run_solve(const std::string& mesh_path, const std::string& space, double tol, const std::string& out) {
  std::ifstream in(mesh_path);
  if (!in) throw Error("cannot read '" + mesh_path + "'");
  const qt::TriMesh mesh = qt::read_mesh(in);
  const ExactField exact = manufactured_field();
  const auto sys = mfem::assemble_hybrid(mesh, mfem::parse_space(space), exact);
  const auto sol = mfem::solve_and_recover(mesh, sys, exact, tol);
  std::ofstream os(out);
  if (!os) throw Error("cannot write '" + out + "'");
  mfem::write_solution(os, sol);
  std::printf("unknowns=%zu iterations=%zu residual=%.3e\n", sys.unknowns(), sol.report.iterations,
              sol.report.relative_residual);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Embedded boundary and mixed-hybrid finite element comparison"};
  app.require_subcommand(1);

  std::string method = "all", boundary = "test1", sizes = "64,128,256,512", out = "out";
  double tol = 1e-9;
  auto* study_cmd = app.add_subcommand("study", "uniform convergence study");
  study_cmd->add_option("--method", method, "ebm|rt0|bdm1|rt1|bdm2|all")->capture_default_str();
  study_cmd->add_option("--boundary", boundary, "test1|test2|file:<path>")->capture_default_str();
  study_cmd->add_option("--sizes", sizes, "comma separated grid sizes")->capture_default_str();
  study_cmd->add_option("--tol", tol, "relative residual tolerance")->capture_default_str();
  study_cmd->add_option("--out", out, "output directory")->capture_default_str();

  std::string space = "rt1", max_levels = "6..10", amr_boundary = "test2", amr_out = "out_amr";
  int min_level = 6;
  double amr_tol = 1e-9;
  auto* amr_cmd = app.add_subcommand("amr", "boundary-refined study");
  amr_cmd->add_option("--space", space, "rt0|bdm1|rt1|bdm2")->capture_default_str();
  amr_cmd->add_option("--min-level", min_level)->capture_default_str();
  amr_cmd->add_option("--max-levels", max_levels, "lo..hi or comma list")->capture_default_str();
  amr_cmd->add_option("--boundary", amr_boundary)->capture_default_str();
  amr_cmd->add_option("--tol", amr_tol)->capture_default_str();
  amr_cmd->add_option("--out", amr_out)->capture_default_str();

  std::string mesh_boundary = "test1", mesh_out = "mesh.txt";
  int mesh_min = 6, mesh_max = 6;
  auto* mesh_cmd = app.add_subcommand("mesh", "write a quadtree triangle mesh");
  mesh_cmd->add_option("--boundary", mesh_boundary)->capture_default_str();
  mesh_cmd->add_option("--min-level", mesh_min)->capture_default_str();
  mesh_cmd->add_option("--max-level", mesh_max)->capture_default_str();
  mesh_cmd->add_option("--out", mesh_out)->capture_default_str();

  std::string solve_mesh, solve_space = "rt0", solve_out = "solution.txt";
  double solve_tol = 1e-9;
  auto* solve_cmd = app.add_subcommand("solve", "mixed-hybrid solve on a mesh file");
  solve_cmd->add_option("--mesh", solve_mesh)->required();
  solve_cmd->add_option("--space", solve_space)->capture_default_str();
  solve_cmd->add_option("--tol", solve_tol)->capture_default_str();
  solve_cmd->add_option("--out", solve_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*study_cmd) return run_study(method, boundary, sizes, tol, out);
    if (*amr_cmd) return run_amr(space, min_level, max_levels, amr_boundary, amr_tol, amr_out);
    if (*mesh_cmd) return run_mesh(mesh_boundary, mesh_min, mesh_max, mesh_out);
    if (*solve_cmd) return run_solve(solve_mesh, solve_space, solve_tol, solve_out);
  } catch (const GeometryError& e) {
    std::fprintf(stderr, "geometry error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
