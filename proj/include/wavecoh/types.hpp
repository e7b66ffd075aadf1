#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace wavecoh {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Every failure raised by the library derives from Error so
// the CLI can map categories onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller violated an interface contract (dimension mismatch, misaligned inputs).
class ContractError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain (non-positive width, negative weight).
class DomainError : public Error {
public:
    using Error::Error;
};

// Potential evaluation produced a non-finite value or a model was misconfigured.
class ModelError : public Error {
public:
    using Error::Error;
};

// Time integration failed (singular Z, blow-up).
class PropagationError : public Error {
public:
    using Error::Error;
};

// Internal numerical cross-check failed.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Grid does not resolve a wavefunction.
class ResolutionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractError(what);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace detail

}  // namespace wavecoh
