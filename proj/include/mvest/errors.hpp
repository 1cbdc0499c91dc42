#pragma once

#include <stdexcept>

namespace mvest {

/// Base class for every error this library raises on its own behalf.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Covariance input failed the symmetry tolerance or a Cholesky pivot
/// fell below tolerance, so the matrix cannot be treated as SPD.
struct NotPositiveDefinite : Error {
    using Error::Error;
};

/// Mean vector is (numerically) proportional to the all-ones vector:
/// AC - B^2 vanishes and the return constraint is redundant or infeasible.
struct DegenerateReturns : Error {
    using Error::Error;
};

/// The KKT system of the brute-force solver is numerically singular.
struct SingularKkt : Error {
    using Error::Error;
};

/// The sample covariance of a trial could not be factorized; expected
/// near and beyond the r = N/T -> 1 boundary.
struct SingularSampleCovariance : Error {
    using Error::Error;
};

/// Parameter outside the validity region of a closed-form prediction
/// (e.g. r <= 0 or r >= 1).
struct OutOfDomain : Error {
    using Error::Error;
};

/// Too few usable grid points for a fit.
struct InsufficientPoints : Error {
    using Error::Error;
};

/// Invalid run configuration (CLI / config file validation).
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace mvest
