#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ablab {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point or path lies where the model is undefined (inside an obstacle, g00 <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Ray meets an obstacle tangentially; geometric optics does not apply.
class GrazingRayError : public Error {
public:
    using Error::Error;
};

class ReflectionBudgetError : public Error {
public:
    using Error::Error;
};

/// Beam/circuit layout cannot realize the requested measurement.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature hit its subdivision cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_estimate, double error_estimate)
        : Error(what), best_estimate_(best_estimate), error_estimate_(error_estimate) {}

    double best_estimate() const { return best_estimate_; }
    double error_estimate() const { return error_estimate_; }

private:
    double best_estimate_;
    double error_estimate_;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

/// Iterative linear solve did not reach its residual target.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double relative_residual)
        : Error(what), relative_residual_(relative_residual) {}
    double relative_residual() const { return relative_residual_; }

private:
    double relative_residual_;
};

class ExperimentDesignError : public Error {
public:
    using Error::Error;
};

class ScheduleTooFastError : public Error {
public:
    using Error::Error;
};

class LabelingError : public Error {
public:
    using Error::Error;
};

class GridMismatchError : public Error {
public:
    using Error::Error;
};

/// Measurement data outside its admissible range.
class DataError : public Error {
public:
    using Error::Error;
};

/// Winding matrix has a zero elementary divisor: some flux combination is unobservable.
class RankDeficientError : public Error {
public:
    using Error::Error;
};

/// |det N| > 1: the measurements admit several flux vectors mod 2*pi.
class AmbiguityError : public Error {
public:
    AmbiguityError(const std::string& what, long long coset_size,
                   std::vector<std::vector<double>> solutions)
        : Error(what), coset_size_(coset_size), solutions_(std::move(solutions)) {}

    long long coset_size() const { return coset_size_; }
    const std::vector<std::vector<double>>& solutions() const { return solutions_; }

private:
    long long coset_size_;
    std::vector<std::vector<double>> solutions_;
};

/// No flux vector reproduces every measurement within tolerance.
class ConsistencyError : public Error {
public:
    ConsistencyError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class DesignFailureError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (CLI exit status 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ablab
