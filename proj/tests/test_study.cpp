#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "ebmfem/errors.hpp"
#include "ebmfem/study.hpp"

using namespace ebmfem;
using namespace ebmfem::study;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("gradient error norm") {
  auto exact = [](Point2) { return Vec2{1.0, -2.0}; };
  const std::vector<GradientSample> one{{{0.0, 0.0}, 4.0, {4.0, 2.0}}};
  CHECK(gradient_error_norm(one, exact) == doctest::Approx(10.0));
  const std::vector<GradientSample> exact_samples{{{0.1, 0.2}, 0.5, {1.0, -2.0}}, {{0.3, 0.2}, 0.25, {1.0, -2.0}}};
  CHECK(gradient_error_norm(exact_samples, exact) == 0.0);
  const std::vector<GradientSample> two{{{0.0, 0.0}, 1.0, {1.0, -1.0}}, {{1.0, 0.0}, 3.0, {3.0, -2.0}}};
  CHECK(gradient_error_norm(two, exact) == doctest::Approx(std::sqrt(1.0 + 3.0 * 4.0)));
}

TEST_CASE("boundary maximum and convergence ratio") {
  auto exact = [](Point2 p) { return Vec2{p.x, p.y}; };
  const std::vector<Point2> pts{{0.5, 0.0}, {0.0, 0.5}};
  CHECK(boundary_max_error(pts, std::vector<Vec2>{{0.5, 0.0}, {0.0, 0.5}}, exact) == 0.0);
  CHECK(boundary_max_error(pts, std::vector<Vec2>{{0.5, 0.1}, {0.3, 0.9}}, exact) == doctest::Approx(0.5));

  CHECK(convergence_ratio(1.593569e-04, 3.670301e-05) == doctest::Approx(2.118).epsilon(5e-4));
  CHECK(convergence_ratio(0.37, 0.37) == 0.0);
  CHECK(convergence_ratio(0.37, 0.37 / 8.0) == doctest::Approx(3.0));
}

TEST_CASE("method names and boundary specs") {
  for (auto m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("RT1") == Method::RT1);
  CHECK_THROWS_AS(parse_method("fem"), InvalidArgument);
  CHECK_FALSE(flux_space(Method::EBM).has_value());
  CHECK(flux_space(Method::BDM2) == mfem::FluxSpace::BDM2);

  CHECK(format_boundary(resolve_boundary("test1")) == format_boundary(test_boundary_1()));
  CHECK(format_boundary(resolve_boundary("test2")) == format_boundary(test_boundary_2()));
  const auto path = std::filesystem::temp_directory_path() / "ebmfem_boundary.txt";
  ImplicitBoundary b = test_boundary_1();
  b.r0 = 0.4;
  std::ofstream(path) << format_boundary(b) << "\n";
  CHECK(format_boundary(resolve_boundary("file:" + path.string())) == format_boundary(b));
  std::filesystem::remove(path);
  CHECK_THROWS(resolve_boundary("test3"));
  CHECK_THROWS(resolve_boundary("file:/nonexistent/boundary.txt"));
}

TEST_CASE("table csv round trip is bit exact") {
  std::vector<ConvergenceRow> rows(3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].size = 64 << i;
    rows[i].error = 1.0 / (3.0 + std::pow(7.1, static_cast<double>(i)));
    rows[i].time = {0.1 / 3.0 * (i + 1), std::sqrt(2.0) * i, 1e-7 / 3.0};
    rows[i].iterations = 17 * (i + 1);
    rows[i].unknowns = 1000 * (i + 1) + 1;
    if (i > 0) rows[i].ratio = convergence_ratio(rows[i - 1].error, rows[i].error);
  }
  std::ostringstream os;
  write_table_csv(os, rows);
  const std::string text = os.str();
  CHECK(text.rfind("size,error,ratio,time_mesh,time_solve,time_interp,iterations,unknowns\n", 0) == 0);
  std::istringstream lines(text);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(first.find(",N/A,") != std::string::npos);

  std::istringstream in(text);
  const auto back = read_table_csv(in);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].size == rows[i].size);
    CHECK(same_bits(back[i].error, rows[i].error));
    CHECK(back[i].ratio.has_value() == rows[i].ratio.has_value());
    if (rows[i].ratio) CHECK(same_bits(*back[i].ratio, *rows[i].ratio));
    CHECK(same_bits(back[i].time.mesh, rows[i].time.mesh));
    CHECK(same_bits(back[i].time.solve, rows[i].time.solve));
    CHECK(same_bits(back[i].time.interp, rows[i].time.interp));
    CHECK(back[i].iterations == rows[i].iterations);
    CHECK(back[i].unknowns == rows[i].unknowns);
  }
  std::istringstream bad("size,error\n1,2\n");
  CHECK_THROWS(read_table_csv(bad));
}

TEST_CASE("all methods share one sample set and order their unknowns") {
  for (const auto& b : {test_boundary_1(), test_boundary_2()}) {
    const auto ex = manufactured_field();
    std::vector<RunResult> runs;
    for (auto m : kAllMethods) runs.push_back(run_single(m, b, 64, ex));
    for (const auto& r : runs) {
      CHECK(r.samples.points == runs[0].samples.points);
      CHECK(r.samples.areas == runs[0].samples.areas);
      CHECK(r.samples.boundary_points == runs[0].samples.boundary_points);
      CHECK(r.numeric.size() == r.samples.points.size());
      CHECK(r.boundary_numeric.size() == r.samples.boundary_points.size());
      CHECK(r.relative_residual <= 1e-9);
      CHECK(r.row.size == 64);
      CHECK(r.row.error > 0.0);
    }
    const auto u = [&](Method m) { return runs[static_cast<std::size_t>(m)].row.unknowns; };
    CHECK(u(Method::EBM) < u(Method::RT0));
    CHECK(u(Method::RT0) < u(Method::BDM1));
    CHECK(u(Method::BDM1) == u(Method::RT1));
    CHECK(u(Method::RT1) < u(Method::BDM2));
    CHECK(u(Method::BDM2) == 3 * u(Method::RT0));

    // Sample weights are the in-domain cell areas.
    double area = 0.0;
    for (double a : runs[0].samples.areas) area += a;
    CHECK(area == doctest::Approx(M_PI * (b.r0 * b.r0 + 0.5 * b.eps * b.eps)).epsilon(0.02));
  }
}

TEST_CASE("error levels at n=128 on test 1") {
  const auto ex = manufactured_field();
  const auto ebm = run_single(Method::EBM, test_boundary_1(), 128, ex);
  CHECK(ebm.row.error <= 3.0 * 3.670301e-05);
  CHECK(ebm.row.error >= 3.670301e-05 / 3.0);
  CHECK(ebm.row.iterations <= 2 * 64);
  const auto rt0 = run_single(Method::RT0, test_boundary_1(), 128, ex);
  CHECK(rt0.row.error <= 3.0 * 5.121661e-04);
  CHECK(rt0.row.error >= 5.121661e-04 / 3.0);
}

TEST_CASE("EBM iteration count at n=64") {
  const auto r = run_single(Method::EBM, test_boundary_1(), 64, manufactured_field());
  CHECK(r.row.iterations <= 64);
  CHECK(std::abs(static_cast<double>(r.row.unknowns) - 861.0) <= 0.05 * 861.0);
}

TEST_CASE("mfem gradients at sample points") {
  const auto ex = linear_field(0.5, -1.5);
  const auto r = run_single(Method::RT0, test_boundary_2(), 64, ex);
  // A linear potential is reproduced everywhere, including by extrapolation
  // at sample points outside the polygon.
  for (const Vec2& g : r.numeric) CHECK(norm(g - Vec2{0.5, -1.5}) <= 1e-8);
  for (const Vec2& g : r.boundary_numeric) CHECK(norm(g - Vec2{0.5, -1.5}) <= 1e-8);
}

TEST_CASE("uniform study rows, error field and outputs") {
  StudyConfig cfg;
  cfg.method = Method::EBM;
  cfg.boundary_spec = "test1";
  cfg.boundary = test_boundary_1();
  cfg.sizes = {64, 128};
  cfg.field_size = 128;
  int seen = 0;
  const auto res = run_uniform_study(cfg, [&](const RunResult&) { ++seen; });
  CHECK(seen == 2);
  REQUIRE(res.rows.size() == 2);
  CHECK_FALSE(res.rows[0].ratio.has_value());
  REQUIRE(res.rows[1].ratio.has_value());
  CHECK(*res.rows[1].ratio == convergence_ratio(res.rows[0].error, res.rows[1].error));
  CHECK(*res.rows[1].ratio >= 1.7);
  CHECK(*res.rows[1].ratio <= 2.4);
  REQUIRE(res.field.has_value());
  CHECK(res.field->n == 128);
  CHECK(res.field->cells.size() == res.rows[1].unknowns);

  const auto again = run_uniform_study(cfg);
  CHECK(study_hash(res.runs) == study_hash(again.runs));
  for (std::size_t i = 0; i < res.runs.size(); ++i) CHECK(res.runs[i].hash == again.runs[i].hash);

  const auto dir = std::filesystem::temp_directory_path() / "ebmfem_study_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  emit_outputs(cfg, res, dir.string());
  const std::string table = read_file(dir / "table.csv");
  std::istringstream tin(table);
  const auto rows = read_table_csv(tin);
  REQUIRE(rows.size() == 2);
  CHECK(same_bits(rows[1].error, res.rows[1].error));

  const std::string grid = read_file(dir / "errorfield_ebm_128.grid");
  std::istringstream gin(grid);
  int i = 0, j = 0;
  double ex = 0.0, ey = 0.0, mag = 0.0;
  std::size_t count = 0;
  while (gin >> i >> j >> ex >> ey >> mag) {
    CHECK(mag == doctest::Approx(std::hypot(ex, ey)));
    ++count;
  }
  CHECK(count == res.field->cells.size());

  const auto meta = nlohmann::json::parse(read_file(dir / "study.json"));
  CHECK(meta.at("method") == "ebm");
  CHECK(meta.at("boundary") == "test1");
  CHECK(meta.at("sizes").size() == 2);
  CHECK(meta.at("runs").size() == 2);

  std::filesystem::remove_all(dir);
  emit_outputs(cfg, again, dir.string() + "_2");
  const auto meta2 = nlohmann::json::parse(read_file(dir.string() + "_2/study.json"));
  CHECK(meta.at("solution_hash") == meta2.at("solution_hash"));
  std::filesystem::remove_all(dir.string() + "_2");
}

TEST_CASE("amr level equal to the minimum reproduces the uniform run") {
  AmrConfig cfg;
  cfg.boundary = test_boundary_2();
  cfg.min_level = 6;
  cfg.max_levels = {6, 7};
  const auto rows = run_amr_study(cfg);
  REQUIRE(rows.size() == 2);
  const auto uni = run_single(Method::RT1, test_boundary_2(), 64, manufactured_field());
  CHECK(rows[0].global_error == uni.row.error);
  CHECK(rows[0].boundary_max == uni.boundary_max);
  CHECK(rows[0].unknowns == uni.row.unknowns);
  CHECK(rows[1].unknowns > rows[0].unknowns);
  CHECK(rows[1].boundary_max < rows[0].boundary_max);

  std::ostringstream os;
  write_amr_csv(os, rows);
  CHECK(os.str().find('\n') != std::string::npos);
}
