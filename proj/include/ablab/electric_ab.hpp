#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ablab/gauge_field.hpp"
#include "ablab/tdse.hpp"

namespace ablab {

/// Unit-disk geometry cut by two vertical slabs {|x1| <= w, x2 >= tau} and {|x1| <= w, x2 <= -tau}.
/// At tau = 0 the slabs meet and the disk splits into D+ (x1 > w) and D- (x1 < -w).
struct SlabGeometry {
    Vec2 center{};
    double disk_radius{1.0};
    double slab_half_width{0.3};
    double tau_max{0.5};

    void validate() const;
    bool contains(const Vec2& p, double tau) const;
};

/// Piecewise-linear tau(t): tau_max -> 0 while growing, 0 while split, 0 -> tau_max while
/// retracting, then tau_max for the remaining post-merge time.
struct DomainSchedule {
    SlabGeometry geometry{};
    double grow_duration{0.05};
    double hold_duration{0.05};
    double retract_duration{0.05};
    double post_merge_duration{0.05};

    void validate() const;
    double tau(double t) const;
    double split_start() const { return grow_duration; }
    double split_end() const { return grow_duration + hold_duration; }
    double total_duration() const {
        return grow_duration + hold_duration + retract_duration + post_merge_duration;
    }
    /// Interior mask (1 = inside the slice) at time t; the outer lattice ring is excluded.
    std::vector<std::uint8_t> mask(const LatticeSpec& spec, double t) const;
};

/// Spatially constant potentials on the two components, switched on only inside
/// [window_start, window_end].
struct SplitPotential {
    std::function<double(double)> v1;
    std::function<double(double)> v2;
    double window_start{0.0};
    double window_end{0.0};

    static SplitPotential constant(double v1, double v2, double start, double end);
    /// Piecewise-linear tables of (t, V) pairs, constant beyond the ends.
    static SplitPotential tabulated(std::vector<std::pair<double, double>> v1,
                                    std::vector<std::pair<double, double>> v2, double start, double end);
    static SplitPotential zero() { return constant(0.0, 0.0, 0.0, 0.0); }

    double value_1(double t) const;
    double value_2(double t) const;
};

/// (alpha_1, alpha_2) with alpha_j = (e / hbar) * integral of V_j over [t0, t1] clipped to the window.
std::pair<double, double> component_phases(const SplitPotential& split, const PhysicalConstants& constants,
                                           double t0, double t1);

/// alpha_1 - alpha_2 over the whole window.
double electric_flux(const SplitPotential& split, const PhysicalConstants& constants);

/// Connected components of the interior sites (4-neighbor). -1 on masked sites.
struct ComponentLabels {
    std::vector<int> labels;
    int count{0};
};
ComponentLabels label_components(const std::vector<std::uint8_t>& mask, int nx, int ny);

/// +1 on D+ sites, -1 on D- sites, 0 on masked sites. Throws LabelingError unless the
/// mask has exactly two components, one on each side of the slab axis.
std::vector<int> split_labels(const LatticeSpec& spec, const std::vector<std::uint8_t>& mask,
                              const SlabGeometry& geometry);

/// Multiplies D+ sites by exp(-i alpha_1) and D- sites by exp(-i alpha_2).
/// Throws LabelingError if an interior site (nonzero value) carries no label.
Field component_phase_evolution(const Field& field_at_split, const SplitPotential& split,
                                const std::vector<int>& labels, const PhysicalConstants& constants);

enum class ElectricMode { AnalyticPhase, FullNumeric };

struct DensityHistory {
    LatticeSpec spec;
    std::vector<double> times;
    /// |u|^2 per site at each recorded time.
    std::vector<std::vector<double>> densities;
    /// Probability removed by re-masking, cumulative, at each recorded time.
    std::vector<double> mask_loss;
    /// Probability in D+ and D- when the slice first splits.
    std::pair<double, double> split_probabilities{0.0, 0.0};
    double split_start{0.0};
    double split_end{0.0};
};

/// Evolves u0 through the moving-domain schedule. Sites that become masked are zeroed
/// (the removed probability is recorded); removing more than 20% of the remaining
/// probability in one step throws ScheduleTooFastError. Requires at least 10% of the
/// probability in each component at split time (ExperimentDesignError otherwise).
DensityHistory run_electric_ab(const DomainSchedule& schedule, const SplitPotential& split,
                               const Field& u0, const LatticeSpec& spec, ElectricMode mode);

/// Max over recorded times in [t0, t1] of ||rho_a - rho_b||_L2 / integral(rho_b),
/// with rho the continuum density |u|^2 / spacing^2.
double density_discrepancy(const DensityHistory& a, const DensityHistory& b, double t0, double t1);

/// Frozen reference configuration used for calibration and regression.
struct ElectricReference {
    DomainSchedule schedule;
    LatticeSpec spec;
    Field u0;
    /// Potential switched on across the split window with V1 - V2 chosen so that
    /// alpha_1 - alpha_2 = delta.
    SplitPotential potential_for(double delta) const;
};
ElectricReference electric_reference();

}  // namespace ablab
