#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ablab/geometry.hpp"
#include "ablab/vec2.hpp"

namespace ablab {

/// hbar, m, e, c. All default to 1 (natural units).
struct PhysicalConstants {
    double hbar{1.0};
    double mass{1.0};
    double charge{1.0};
    double light_speed{1.0};

    /// Throws DomainError unless every constant is finite and positive.
    void validate() const;

    /// e / (hbar c): converts a line integral of A into a dimensionless phase.
    double magnetic_phase_factor() const { return charge / (hbar * light_speed); }
};

/// Point-like flux tube: curl-free outside its center, circulation `flux` (radians).
struct Solenoid {
    Vec2 center;
    double flux{0.0};
};

/// Single-valued gauge function chi added as A -> A + (hbar c / e) grad chi.
/// `support` bounds where grad chi may be nonzero (unbounded when empty).
struct GaugeTerm {
    std::function<double(Vec2)> phase;
    std::function<Vec2(Vec2)> gradient;
    std::optional<Disk> support;
};

/// Curl-free vector potential outside a set of obstacles.
///
/// The main realization is the multi-solenoid field
///   A(x) = (hbar c / e) sum_j alpha_j / (2 pi) * perp(x - c_j) / |x - c_j|^2,
/// whose circulation around obstacle j alone is exactly alpha_j in phase units.
/// Gauge terms and an optional free-form field can be layered on top.
class VectorPotential {
public:
    VectorPotential() = default;
    VectorPotential(PhysicalConstants constants, std::vector<Disk> obstacles,
                    std::vector<Solenoid> solenoids);

    /// Arbitrary smooth field (physical units); used for test potentials such as (-y, x)/2.
    static VectorPotential from_field(std::function<Vec2(Vec2)> field,
                                      PhysicalConstants constants = {},
                                      std::vector<Disk> obstacles = {});

    /// A(x) in physical units. Throws DomainError inside an obstacle.
    Vec2 operator()(const Vec2& p) const;

    /// (e / hbar c) A(x): the integrand of every phase integral.
    Vec2 phase_gradient(const Vec2& p) const;

    /// (e / hbar c) * integral of A along the straight segment a -> b, without domain checks.
    ///
    /// Exact (subtended angles plus gauge-function differences) unless a free-form
    /// field is present, in which case it falls back to tight quadrature.
    double edge_phase(const Vec2& a, const Vec2& b) const;

    bool has_free_field() const { return static_cast<bool>(free_field_); }
    bool decays_at_infinity() const;

    const PhysicalConstants& constants() const { return constants_; }
    const std::vector<Disk>& obstacles() const { return obstacles_; }
    const std::vector<Solenoid>& solenoids() const { return solenoids_; }
    const std::vector<GaugeTerm>& gauge_terms() const { return gauge_terms_; }

    /// Circulation of obstacle j's solenoid, in radians.
    std::vector<double> fluxes() const;

    VectorPotential with_gauge_term(GaugeTerm term) const;

private:
    Vec2 phase_gradient_unchecked(const Vec2& p) const;

    PhysicalConstants constants_{};
    std::vector<Disk> obstacles_;
    std::vector<Solenoid> solenoids_;
    std::vector<GaugeTerm> gauge_terms_;
    std::function<Vec2(Vec2)> free_field_;
};

/// Multi-solenoid potential realizing each obstacle's `flux`.
VectorPotential ab_potential(const Scene& scene, const PhysicalConstants& constants = {});

/// Integral of a planar 1-form along a finite path with adaptive Gauss-Kronrod per piece.
/// The error estimate is kept below `abs_tol` overall. Half-lines are rejected.
double one_form_integral(const std::function<Vec2(Vec2)>& form, const Path& path, double abs_tol);

/// Truncation length for a half-line such that the analytic 1/s^2 tail bound of
/// the solenoid field beyond it is at most `tail_tol`.
double half_line_cutoff(const VectorPotential& potential, const HalfLine& ray, double tail_tol);

/// Phase integral along the half-line truncated at `cutoff`.
double truncated_half_line_phase(const VectorPotential& potential, const HalfLine& ray,
                                 double cutoff, double abs_tol);

/// Dimensionless gauge phase (e / hbar c) * integral of A along `path`.
///
/// rel_tol must lie in (1e-14, 1e-2); the error target is rel_tol * max(1, |result|).
/// Throws DomainError when the path enters an obstacle and ConvergenceError when
/// the subdivision cap is hit.
double line_integral(const VectorPotential& potential, const Path& path, double rel_tol);

/// Circulation around a closed loop, in radians.
double loop_flux(const VectorPotential& potential, const Loop& loop, double rel_tol);

/// A'(x) = A(x) + (hbar c / e) grad phase(x); fluxes are unchanged.
VectorPotential gauge_transform(const VectorPotential& potential,
                                std::function<double(Vec2)> phase,
                                std::function<Vec2(Vec2)> grad_phase,
                                std::optional<Disk> support = std::nullopt);

/// Central-difference curl dA2/dx - dA1/dy. Throws DomainError when the stencil clips an obstacle.
double curl_at(const VectorPotential& potential, const Vec2& point, double h);

/// Time-dependent potentials (A(x, t), V(x, t)) in physical units.
struct SpacetimePotential {
    std::function<Vec2(Vec2, double)> magnetic;
    std::function<double(Vec2, double)> electric;
    PhysicalConstants constants{};
    std::vector<Disk> obstacles;
};

struct SpacetimePoint {
    Vec2 x;
    double t{0.0};
};

/// Closed polygonal curve in (x, t), given by its vertices.
using SpacetimeLoop = std::vector<SpacetimePoint>;

/// (e / hbar) * closed integral of (1/c) A . dx - V dt.
double electromagnetic_flux(const SpacetimePotential& potential, const SpacetimeLoop& loop,
                            double rel_tol);

/// Stationary metric components on the plane: g00 > 0 and the mixed part g_{j0}.
struct StationaryMetric {
    std::function<double(Vec2)> g00;
    std::function<Vec2(Vec2)> g0j;
};

/// Closed integral of sum_j (g_{j0} / g00) dx_j. Throws DomainError if g00 <= 0 on the loop.
double gravitational_flux(const StationaryMetric& metric, const Loop& loop, double rel_tol);

}  // namespace ablab
