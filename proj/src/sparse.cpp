#include "ebmfem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>

#include "ebmfem/errors.hpp"

namespace ebmfem::sparse {

CsrMatrix::CsrMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<Index> col,
                     std::vector<double> val)
    : n_(n), row_ptr_(std::move(row_ptr)), col_(std::move(col)), val_(std::move(val)) {
  if (row_ptr_.size() != n_ + 1 || col_.size() != val_.size() || row_ptr_.back() != col_.size()) {
    throw InvalidArgument("inconsistent CSR arrays");
  }
}

std::ptrdiff_t CsrMatrix::find(std::size_t row, std::size_t c) const {
  const auto first = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
  const auto last = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
  const auto it = std::lower_bound(first, last, static_cast<Index>(c));
  if (it == last || *it != static_cast<Index>(c)) return -1;
  return it - col_.begin();
}

double CsrMatrix::coeff(std::size_t row, std::size_t c) const {
  const auto pos = find(row, c);
  return pos < 0 ? 0.0 : val_[static_cast<std::size_t>(pos)];
}

void CsrMatrix::add(std::size_t row, std::size_t c, double v) {
  if (row >= n_ || c >= n_) throw IndexOutOfRange("matrix entry out of range");
  const auto pos = find(row, c);
  if (pos < 0) throw IndexOutOfRange("entry outside the sparsity pattern");
  val_[static_cast<std::size_t>(pos)] += v;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  kernels::matvec(*this, x, y);
}

std::vector<double> CsrMatrix::operator*(std::span<const double> x) const {
  std::vector<double> y(n_);
  multiply(x, y);
  return y;
}

void CsrMatrix::pin(std::size_t r, double value, std::span<double> rhs, bool symmetric) {
  if (r >= n_) throw IndexOutOfRange("pinned row out of range");
  double diag = coeff(r, r);
  if (diag == 0.0) diag = 1.0;
  if (symmetric) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const auto c = static_cast<std::size_t>(col_[p]);
      if (c == r) continue;
      // Pattern is structurally symmetric for the systems we pin.
      const auto q = find(c, r);
      if (q >= 0) {
        rhs[c] -= val_[static_cast<std::size_t>(q)] * value;
        val_[static_cast<std::size_t>(q)] = 0.0;
      }
    }
  }
  for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
    val_[p] = static_cast<std::size_t>(col_[p]) == r ? diag : 0.0;
  }
  rhs[r] = diag * value;
}

CsrMatrix csr_from_triplets(std::size_t n, std::span<const Triplet> entries) {
  std::vector<std::size_t> count(n + 1, 0);
  for (const auto& t : entries) {
    if (t.row < 0 || t.col < 0 || static_cast<std::size_t>(t.row) >= n ||
        static_cast<std::size_t>(t.col) >= n) {
      throw IndexOutOfRange("triplet index out of range");
    }
    ++count[static_cast<std::size_t>(t.row) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) count[i + 1] += count[i] + 1;  // +1 for the diagonal
  std::vector<Index> col(count[n]);
  std::vector<double> val(count[n]);
  std::vector<std::size_t> fill(count.begin(), count.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    col[fill[i]] = static_cast<Index>(i);
    val[fill[i]++] = 0.0;
  }
  for (const auto& t : entries) {
    const auto r = static_cast<std::size_t>(t.row);
    col[fill[r]] = t.col;
    val[fill[r]++] = t.value;
  }
  // Sort each row and merge duplicates.
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::pair<Index, double>> buf;
  std::size_t out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    buf.clear();
    for (std::size_t p = count[i]; p < count[i + 1]; ++p) buf.emplace_back(col[p], val[p]);
    std::stable_sort(buf.begin(), buf.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    row_ptr[i] = out;
    for (std::size_t q = 0; q < buf.size();) {
      double sum = 0.0;
      const Index c = buf[q].first;
      for (; q < buf.size() && buf[q].first == c; ++q) sum += buf[q].second;
      col[out] = c;
      val[out++] = sum;
    }
  }
  row_ptr[n] = out;
  col.resize(out);
  val.resize(out);
  return CsrMatrix(n, std::move(row_ptr), std::move(col), std::move(val));
}

CsrMatrix csr_from_pattern(std::size_t n, const std::vector<std::vector<Index>>& columns) {
  if (columns.size() != n) throw InvalidArgument("pattern row count mismatch");
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<Index> col;
  std::vector<Index> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.assign(columns[i].begin(), columns[i].end());
    row.push_back(static_cast<Index>(i));
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (Index c : row) {
      if (c < 0 || static_cast<std::size_t>(c) >= n) throw IndexOutOfRange("pattern column out of range");
      col.push_back(c);
    }
    row_ptr[i + 1] = col.size();
  }
  std::vector<double> val(col.size(), 0.0);
  return CsrMatrix(n, std::move(row_ptr), std::move(col), std::move(val));
}

Ilu0Factors::Ilu0Factors(CsrMatrix lu) : lu_(std::move(lu)), diag_(lu_.size()) {
  for (std::size_t i = 0; i < lu_.size(); ++i) {
    const auto pos = lu_.find(i, i);
    if (pos < 0) throw ZeroPivot(i);
    diag_[i] = static_cast<std::size_t>(pos);
  }
}

void Ilu0Factors::apply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = lu_.size();
  const auto rp = lu_.row_ptr();
  const auto col = lu_.col();
  const auto val = lu_.values();
  if (out.data() != in.data()) std::copy(in.begin(), in.end(), out.begin());
  for (std::size_t i = 0; i < n; ++i) {
    double s = out[i];
    for (std::size_t p = rp[i]; p < diag_[i]; ++p) s -= val[p] * out[static_cast<std::size_t>(col[p])];
    out[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = out[i];
    for (std::size_t p = diag_[i] + 1; p < rp[i + 1]; ++p) {
      s -= val[p] * out[static_cast<std::size_t>(col[p])];
    }
    out[i] = s / val[diag_[i]];
  }
}

Ilu0Factors ilu0_factorize(const CsrMatrix& a) {
  CsrMatrix lu = a;
  const std::size_t n = lu.size();
  const auto rp = lu.row_ptr();
  const auto col = lu.col();
  auto val = lu.values();
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pos = lu.find(i, i);
    if (pos < 0) throw ZeroPivot(i);
    diag[i] = static_cast<std::size_t>(pos);
  }
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> where(n, kUnset);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) where[static_cast<std::size_t>(col[p])] = p;
    for (std::size_t p = rp[i]; p < diag[i]; ++p) {
      const auto k = static_cast<std::size_t>(col[p]);
      const double pivot = val[diag[k]];
      if (pivot == 0.0) throw ZeroPivot(k);
      const double lik = val[p] / pivot;
      val[p] = lik;
      for (std::size_t q = diag[k] + 1; q < rp[k + 1]; ++q) {
        const std::size_t w = where[static_cast<std::size_t>(col[q])];
        if (w != kUnset) val[w] -= lik * val[q];
      }
    }
    if (val[diag[i]] == 0.0 || !std::isfinite(val[diag[i]])) throw ZeroPivot(i);
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) where[static_cast<std::size_t>(col[p])] = kUnset;
  }
  return Ilu0Factors(std::move(lu));
}

double true_relative_residual(const CsrMatrix& a, std::span<const double> x,
                              std::span<const double> b) {
  std::vector<double> r(a.size());
  a.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const double nb = kernels::norm2(b);
  const double nr = kernels::norm2(r);
  return nb == 0.0 ? nr : nr / nb;
}

SolveResult bicgstab(const CsrMatrix& a, const Ilu0Factors& m, std::span<const double> b,
                     double rel_tol, std::size_t max_iter) {
  using namespace kernels;
  const std::size_t n = a.size();
  if (b.size() != n) throw InvalidArgument("rhs size mismatch");
  if (!(rel_tol > 0.0)) throw InvalidArgument("relative tolerance must be positive");

  SolveResult out;
  out.x.assign(n, 0.0);
  auto& x = out.x;
  auto& rep = out.report;
  const double nb = norm2(b);
  if (nb == 0.0) {
    rep.converged = true;
    return out;
  }

  std::vector<double> r(b.begin(), b.end()), rhat(n), p(n, 0.0), v(n, 0.0), phat(n), s(n),
      shat(n), t(n);
  double rho_old = 1.0, alpha = 1.0, omega = 1.0;
  bool fresh = true;
  std::size_t breakdowns = 0;
  std::size_t drift_restarts = 0;
  constexpr std::size_t kMaxDriftRestarts = 8;
  constexpr double kTiny = 1e-300;

  auto restart = [&] {
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    fresh = true;
    ++rep.restarts;
  };
  auto on_breakdown = [&](const char* what) {
    if (++breakdowns > 1) throw SolverBreakdown(std::string("BiCGSTAB breakdown: ") + what);
    restart();
  };
  // True residual check. Returns true when converged; restarts otherwise.
  auto accept = [&] {
    rep.relative_residual = true_relative_residual(a, x, b);
    if (rep.relative_residual <= rel_tol) {
      rep.converged = true;
      return true;
    }
    if (++drift_restarts > kMaxDriftRestarts) {
      throw SolverBreakdown("BiCGSTAB true residual stagnates above tolerance");
    }
    restart();
    return false;
  };

  while (rep.iterations < max_iter) {
    if (fresh) {
      std::copy(r.begin(), r.end(), rhat.begin());
      rho_old = alpha = omega = 1.0;
      std::fill(p.begin(), p.end(), 0.0);
      std::fill(v.begin(), v.end(), 0.0);
    }
    const double rho = dot(rhat, r);
    if (std::abs(rho) < kTiny || !std::isfinite(rho)) {
      on_breakdown("rho vanished");
      continue;
    }
    if (fresh) {
      std::copy(r.begin(), r.end(), p.begin());
      fresh = false;
    } else {
      const double beta = (rho / rho_old) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    ++rep.iterations;
    m.apply(p, phat);
    a.multiply(phat, v);
    const double rv = dot(rhat, v);
    if (std::abs(rv) < kTiny || !std::isfinite(rv)) {
      on_breakdown("(rhat, v) vanished");
      continue;
    }
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    if (norm2(s) / nb <= rel_tol) {
      axpy(alpha, phat, x);
      if (accept()) return out;
      continue;
    }
    m.apply(s, shat);
    a.multiply(shat, t);
    const double tt = dot(t, t);
    omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
    axpy(alpha, phat, x);
    axpy(omega, shat, x);
    for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
    if (norm2(r) / nb <= rel_tol) {
      if (accept()) return out;
      continue;
    }
    if (std::abs(omega) < kTiny || !std::isfinite(omega)) {
      on_breakdown("omega vanished");
      continue;
    }
    rho_old = rho;
  }
  rep.relative_residual = true_relative_residual(a, x, b);
  throw MaxIterationsExceeded("BiCGSTAB did not converge in " + std::to_string(max_iter) +
                              " iterations (relative residual " +
                              std::to_string(rep.relative_residual) + ")");
}

void write_matrix_market(std::ostream& os, const CsrMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.size() << ' ' << a.size() << ' ' << a.nonzeros() << '\n';
  os.precision(17);
  const auto rp = a.row_ptr();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      os << i + 1 << ' ' << a.col()[p] + 1 << ' ' << a.values()[p] << '\n';
    }
  }
}

namespace kernels {

namespace {
constexpr std::size_t kBlock = 4096;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  if (nblocks <= 1) return reference::dot(a, b);
  std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[static_cast<std::size_t>(blk)] = s;
  }
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  const auto rp = a.row_ptr();
  const auto col = a.col();
  const auto val = a.values();
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) s += val[p] * x[static_cast<std::size_t>(col[p])];
    y[i] = s;
  }
}

}  // namespace kernels

std::uint64_t fnv1a(std::span<const double> v) {
  std::uint64_t h = 14695981039346656037ull;
  for (double d : v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &d, sizeof d);
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace ebmfem::sparse
