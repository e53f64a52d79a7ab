#include "ablab/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "ablab/errors.hpp"

namespace ablab {

namespace {

// Kronrod abscissae (positive half) and weights; Gauss-7 weights on the even nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
    double a;
    double b;
    double value;
    double error;
    bool operator<(const Interval& o) const { return error < o.error; }
};

Interval gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(center - dx) + f(center + dx);
        kronrod += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol, double rel_tol, int max_intervals) {
    if (a == b) return {0.0, 0.0, 0};
    std::priority_queue<Interval> heap;
    const Interval first = gauss_kronrod(f, a, b);
    heap.push(first);
    double value = first.value;
    double error = first.error;
    int count = 1;
    while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
        if (count >= max_intervals) {
            throw ConvergenceError("adaptive quadrature hit its subdivision cap", value, error);
        }
        const Interval worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const Interval left = gauss_kronrod(f, worst.a, mid);
        const Interval right = gauss_kronrod(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++count;
        // Running sums drift; refresh them from the heap now and then.
        if (count % 256 == 0) {
            auto copy = heap;
            value = 0.0;
            error = 0.0;
            while (!copy.empty()) {
                value += copy.top().value;
                error += copy.top().error;
                copy.pop();
            }
        }
    }
    return {value, error, count};
}

}  // namespace ablab
