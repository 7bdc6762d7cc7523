#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace ebmfem::sparse {

using Index = std::int32_t;

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Square CSR matrix. Columns are sorted and unique within each row and
/// every row stores its diagonal (possibly as an explicit zero).
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<Index> col,
            std::vector<double> val);

  std::size_t size() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return col_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const Index> col() const noexcept { return col_; }
  std::span<const double> values() const noexcept { return val_; }
  std::span<double> values() noexcept { return val_; }

  /// Position of (row, col) in values(), or -1 when outside the pattern.
  std::ptrdiff_t find(std::size_t row, std::size_t col) const;
  double coeff(std::size_t row, std::size_t col) const;
  /// Adds into an existing pattern entry; throws IndexOutOfRange otherwise.
  void add(std::size_t row, std::size_t col, double v);

  /// y = A x (OpenMP kernel).
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> operator*(std::span<const double> x) const;

  /// Replaces row r by the unit row, moves column r to `rhs` using
  /// `value`, and sets rhs[r] = diag * value. Keeps symmetry when
  /// `symmetric` is set; otherwise only the row is touched.
  void pin(std::size_t r, double value, std::span<double> rhs, bool symmetric);

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Index> col_;
  std::vector<double> val_;
};

/// Duplicates are summed and missing diagonals inserted as explicit zeros.
CsrMatrix csr_from_triplets(std::size_t n, std::span<const Triplet> entries);

/// Zero-valued matrix on a given pattern (columns per row, any order,
/// duplicates allowed). Diagonals are always included.
CsrMatrix csr_from_pattern(std::size_t n, const std::vector<std::vector<Index>>& columns);

/// ILU(0) factors stored on the pattern of A: strictly lower part holds
/// L (unit diagonal implied), the rest holds U.
class Ilu0Factors {
 public:
  Ilu0Factors() = default;
  explicit Ilu0Factors(CsrMatrix lu);

  const CsrMatrix& lu() const noexcept { return lu_; }
  /// out = (LU)^{-1} in. `in` and `out` may alias.
  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  CsrMatrix lu_;
  std::vector<std::size_t> diag_;
};

/// IKJ incomplete factorization with zero fill-in. Throws ZeroPivot.
Ilu0Factors ilu0_factorize(const CsrMatrix& a);

struct SolveReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::size_t restarts = 0;
};

struct SolveResult {
  std::vector<double> x;
  SolveReport report;
};

/// Right-preconditioned BiCGSTAB starting from x0 = 0. Convergence is
/// declared only after ||b - A x|| / ||b|| <= rel_tol is recomputed from
/// scratch. Throws SolverBreakdown (after one restart) or
/// MaxIterationsExceeded.
SolveResult bicgstab(const CsrMatrix& a, const Ilu0Factors& m, std::span<const double> b,
                     double rel_tol, std::size_t max_iter);

double true_relative_residual(const CsrMatrix& a, std::span<const double> x,
                              std::span<const double> b);

void write_matrix_market(std::ostream& os, const CsrMatrix& a);

/// OpenMP vector kernels. Reductions are blocked with a fixed block size
/// and summed in order, so results do not depend on the thread count.
namespace kernels {
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void matvec(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
}  // namespace kernels

/// Serial reference implementations kept for cross-checking the
/// parallel kernels and for benchmarking.
namespace reference {
double dot(std::span<const double> a, std::span<const double> b);
void matvec(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
/// Dense row-major LU with partial pivoting; solves in place.
std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b, std::size_t n);
}  // namespace reference

/// 64-bit FNV-1a over the raw bytes of a vector.
std::uint64_t fnv1a(std::span<const double> v);

}  // namespace ebmfem::sparse
