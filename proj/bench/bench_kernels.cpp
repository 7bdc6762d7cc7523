#include <vector>

#include <benchmark/benchmark.h>

#include "ebmfem/sparse.hpp"

using namespace ebmfem::sparse;

namespace {

CsrMatrix laplacian(int m) {
  std::vector<Triplet> t;
  auto id = [m](int i, int j) { return static_cast<Index>(j * m + i); };
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      t.push_back({id(i, j), id(i, j), 4.0});
      if (i > 0) t.push_back({id(i, j), id(i - 1, j), -1.0});
      if (i + 1 < m) t.push_back({id(i, j), id(i + 1, j), -1.0});
      if (j > 0) t.push_back({id(i, j), id(i, j - 1), -1.0});
      if (j + 1 < m) t.push_back({id(i, j), id(i, j + 1), -1.0});
    }
  }
  return csr_from_triplets(static_cast<std::size_t>(m) * m, t);
}

std::vector<double> ramp(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 997);
  return v;
}

void BM_DotParallel(benchmark::State& s) {
  const auto a = ramp(static_cast<std::size_t>(s.range(0))), b = ramp(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::dot(a, b));
}

void BM_DotReference(benchmark::State& s) {
  const auto a = ramp(static_cast<std::size_t>(s.range(0))), b = ramp(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(reference::dot(a, b));
}

void BM_MatvecParallel(benchmark::State& s) {
  const CsrMatrix a = laplacian(static_cast<int>(s.range(0)));
  const auto x = ramp(a.size());
  std::vector<double> y(a.size());
  for (auto _ : s) {
    kernels::matvec(a, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_MatvecReference(benchmark::State& s) {
  const CsrMatrix a = laplacian(static_cast<int>(s.range(0)));
  const auto x = ramp(a.size());
  std::vector<double> y(a.size());
  for (auto _ : s) {
    reference::matvec(a, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_BicgstabLaplacian(benchmark::State& s) {
  const CsrMatrix a = laplacian(static_cast<int>(s.range(0)));
  const auto b = ramp(a.size());
  for (auto _ : s) {
    const Ilu0Factors ilu = ilu0_factorize(a);
    benchmark::DoNotOptimize(bicgstab(a, ilu, b, 1e-9, 10000).report.iterations);
  }
}

}  // namespace

BENCHMARK(BM_DotParallel)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_DotReference)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_MatvecParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_MatvecReference)->Arg(256)->Arg(1024);
BENCHMARK(BM_BicgstabLaplacian)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
