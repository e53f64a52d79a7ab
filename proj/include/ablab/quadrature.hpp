#pragma once

#include <functional>

namespace ablab {

struct QuadratureResult {
    double value{0.0};
    double error{0.0};
    int intervals{0};
};

/// Globally adaptive 15-point Gauss-Kronrod quadrature on [a, b].
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below max(abs_tol, rel_tol * |value|). Throws
/// ConvergenceError (carrying the best estimate) once `max_intervals` is reached.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol, double rel_tol, int max_intervals = 1 << 16);

}  // namespace ablab
