#pragma once

#include <stdexcept>
#include <string>

namespace ebmfem {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The mesh or grid is too coarse for the boundary: refine and retry.
/// Mapped to CLI exit code 2.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class AssumptionViolation : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class GeometryDegenerate : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class AmbiguousTopology : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class InvertedElement : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class StencilUnavailable : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class OutsideDomain : public GeometryError {
 public:
  using GeometryError::GeometryError;
};
class DegenerateGradient : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Linear algebra failures. Mapped to CLI exit code 3.
class SolverError : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public SolverError {
 public:
  using SolverError::SolverError;
};
class SingularLocalSystem : public SolverError {
 public:
  using SolverError::SolverError;
};
class ZeroPivot : public SolverError {
 public:
  explicit ZeroPivot(std::size_t row)
      : SolverError("zero pivot in ILU(0) at row " + std::to_string(row)), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};
class SolverBreakdown : public SolverError {
 public:
  using SolverError::SolverError;
};
class MaxIterationsExceeded : public SolverError {
 public:
  using SolverError::SolverError;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace ebmfem
