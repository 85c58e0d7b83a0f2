#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fiberot {

// Base of all library errors. The CLI maps subclasses to exit codes:
// ValidationError -> 2, SizeCapExceeded -> 3, NotConverged (see barycenter.hpp) -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Anything wrong with inputs: malformed measures, mismatched bases, bad certificates.
struct ValidationError : Error {
    using Error::Error;
};

struct EmptySupport : ValidationError {
    EmptySupport() : ValidationError("measure has no point with positive weight") {}
};

struct DimensionMismatch : ValidationError {
    DimensionMismatch(std::size_t expected, std::size_t got)
        : ValidationError("point dimension " + std::to_string(got) + " does not match fiber space dimension " + std::to_string(expected)),
          expected(expected), got(got) {}
    std::size_t expected;
    std::size_t got;
};

struct MarginalMismatch : ValidationError {
    MarginalMismatch(const std::string& atom, double expected, double got)
        : ValidationError("base marginal at atom '" + atom + "' is " + std::to_string(got) + ", base measure has " + std::to_string(expected)),
          atom(atom), expected(expected), got(got) {}
    std::string atom;
    double expected;
    double got;
};

struct UnknownBaseLabel : ValidationError {
    explicit UnknownBaseLabel(const std::string& label)
        : ValidationError("record references base atom '" + label + "' which is not in the base measure"), label(label) {}
    std::string label;
};

struct MissingChartEntry : ValidationError {
    explicit MissingChartEntry(const std::string& label)
        : ValidationError("atlas has no isometry for base atom '" + label + "'"), label(label) {}
    std::string label;
};

struct BaseMismatch : ValidationError {
    using ValidationError::ValidationError;
};

struct NonGeodesicFiberSpace : ValidationError {
    NonGeodesicFiberSpace()
        : ValidationError("fiber space has no point interpolation; displacement geodesics need p=1 or a linear fiber space") {}
};

struct UnsupportedFiberKind : ValidationError {
    using ValidationError::ValidationError;
};

struct SchemaError : ValidationError {
    using ValidationError::ValidationError;
};

// Certificate admissibility broken at one support pair; indices identify it.
struct InadmissibleCertificate : ValidationError {
    InadmissibleCertificate(std::size_t fiber, std::size_t row, std::size_t col, double violation)
        : ValidationError("certificate violates -phi(t)-psi(s) <= d(t,s)^p at fiber " + std::to_string(fiber) +
                          ", pair (" + std::to_string(row) + "," + std::to_string(col) + ") by " + std::to_string(violation)),
          fiber(fiber), row(row), col(col), violation(violation) {}
    std::size_t fiber;
    std::size_t row;
    std::size_t col;
    double violation;
};

// Z_k zeta_k * xi_k == 0 broken at one evaluation point.
struct ConstraintViolation : ValidationError {
    ConstraintViolation(std::size_t fiber, std::size_t point, double residual)
        : ValidationError("dual constraint sum_k zeta_k*xi_k = 0 violated at fiber " + std::to_string(fiber) +
                          ", evaluation point " + std::to_string(point) + " with residual " + std::to_string(residual)),
          fiber(fiber), point(point), residual(residual) {}
    std::size_t fiber;
    std::size_t point;
    double residual;
};

struct SizeCapExceeded : Error {
    SizeCapExceeded(std::size_t rows, std::size_t cols, std::size_t cap)
        : Error("transport problem " + std::to_string(rows) + "x" + std::to_string(cols) +
                " exceeds the entry cap " + std::to_string(cap)),
          rows(rows), cols(cols), cap(cap) {}
    std::size_t rows;
    std::size_t cols;
    std::size_t cap;
};

} // namespace fiberot
