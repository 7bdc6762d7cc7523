#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ebmfem/ebm.hpp"
#include "ebmfem/geometry.hpp"
#include "ebmfem/mfem.hpp"

namespace ebmfem::study {

enum class Method { EBM, RT0, BDM1, RT1, BDM2 };

inline constexpr std::array<Method, 5> kAllMethods{Method::EBM, Method::RT0, Method::BDM1, Method::RT1,
                                                   Method::BDM2};

std::string to_string(Method m);
/// "ebm", "rt0", "bdm1", "rt1", "bdm2" (case-insensitive).
Method parse_method(std::string_view text);
std::optional<mfem::FluxSpace> flux_space(Method m);

/// "test1", "test2" or "file:<path>" holding the boundary serialization.
ImplicitBoundary resolve_boundary(std::string_view spec);

/// Points every method is scored on for a given grid: centers of
/// internal and partial cells weighted by their in-domain area, and the
/// chord midpoints of the partial cells.
struct SampleSet {
  int n = 0;
  std::vector<Point2> points;
  std::vector<double> areas;
  std::vector<std::array<int, 2>> cells;  // (i, j)
  std::vector<Point2> boundary_points;
  std::vector<Vec2> boundary_normals;  // outward chord normals
};

SampleSet sample_set(const ebm::EbmGeometry& geom);

struct GradientSample {
  Point2 point;
  double area;
  Vec2 numeric;
};

/// sqrt(sum area * |numeric - exact|^2).
double gradient_error_norm(std::span<const GradientSample> samples, const std::function<Vec2(Point2)>& exact_grad);
/// max |numeric - exact| over the points.
double boundary_max_error(std::span<const Point2> points, std::span<const Vec2> numeric,
                          const std::function<Vec2(Point2)>& exact_grad);
/// log2(coarse / fine).
double convergence_ratio(double err_coarse, double err_fine);

struct PhaseTimes {
  double mesh = 0.0;
  double solve = 0.0;
  double interp = 0.0;
  double total() const { return mesh + solve + interp; }
};

struct ConvergenceRow {
  int size = 0;
  double error = 0.0;
  std::optional<double> ratio;
  PhaseTimes time;
  std::size_t iterations = 0;
  std::size_t unknowns = 0;
};

/// Everything one method produces at one mesh size.
struct RunResult {
  Method method = Method::EBM;
  ConvergenceRow row;
  double boundary_max = 0.0;
  double relative_residual = 0.0;  // recomputed after the solve
  std::uint64_t hash = 0;          // of the solved unknowns
  SampleSet samples;
  std::vector<Vec2> numeric;           // per sample point
  std::vector<Vec2> boundary_numeric;  // per boundary point
};

/// Gradient q = -grad phi reported as grad phi for every method.
RunResult run_single(Method method, const ImplicitBoundary& boundary, int n, const ExactField& exact,
                     double tol = 1e-9);

/// Flux of an MFEM solution at arbitrary points. Points outside the
/// triangulated polygon are evaluated with the polynomial of a nearby
/// boundary element.
std::vector<Vec2> mfem_gradient_at(const mfem::FieldSolution& sol, const qt::TriMesh& mesh,
                                   const qt::Quadtree& tree, std::span<const Point2> points);

struct StudyConfig {
  Method method = Method::EBM;
  std::string boundary_spec = "test1";
  ImplicitBoundary boundary;
  std::vector<int> sizes{64, 128, 256, 512};
  double tol = 1e-9;
  int field_size = 128;
};

struct ErrorField {
  int n = 0;
  std::vector<std::array<int, 2>> cells;
  std::vector<Vec2> error;
};

struct StudyResult {
  std::vector<ConvergenceRow> rows;
  std::vector<RunResult> runs;
  std::optional<ErrorField> field;
};

/// Runs the ladder; `on_row` sees each row as soon as it is complete.
StudyResult run_uniform_study(const StudyConfig& config,
                              const std::function<void(const RunResult&)>& on_row = {});

struct AmrConfig {
  mfem::FluxSpace space = mfem::FluxSpace::RT1;
  std::string boundary_spec = "test2";
  ImplicitBoundary boundary;
  int min_level = 6;
  std::vector<int> max_levels{6, 7, 8, 9, 10};
  double tol = 1e-9;
};

struct AmrRow {
  int max_level = 0;
  double global_error = 0.0;
  double boundary_max = 0.0;
  PhaseTimes time;
  std::size_t iterations = 0;
  std::size_t unknowns = 0;
  double relative_residual = 0.0;
};

/// Global error on the 2^min_level grid sample set; boundary maxima at
/// the chord midpoints of the 2^max_level grid.
std::vector<AmrRow> run_amr_study(const AmrConfig& config, const std::function<void(const AmrRow&)>& on_row = {});

ErrorField error_field(const RunResult& run, const ExactField& exact);

/// size,error,ratio,time_mesh,time_solve,time_interp,iterations,unknowns
void write_table_csv(std::ostream& os, std::span<const ConvergenceRow> rows);
std::vector<ConvergenceRow> read_table_csv(std::istream& is);
void write_amr_csv(std::ostream& os, std::span<const AmrRow> rows);
/// One line per cell: "i j ex ey |e|".
void write_error_field(std::ostream& os, const ErrorField& field);

/// table.csv, errorfield_<method>_<n>.grid and study.json in `dir`.
void emit_outputs(const StudyConfig& config, const StudyResult& result, const std::string& dir);

/// Hash over the per-run solution hashes, in row order.
std::uint64_t study_hash(std::span<const RunResult> runs);

}  // namespace ebmfem::study
