#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ablab/geometry.hpp"
#include "ablab/go_engine.hpp"

namespace ablab {

using IntMatrix = std::vector<std::vector<long long>>;

/// One measured circuit phase: either an exact phase (radians, mod 2 pi) or an
/// intensity 4 sin^2(beta / 2) that fixes beta only up to sign.
struct Measurement {
    enum class Kind { Phase, Intensity };
    Kind kind{Kind::Phase};
    double value{0.0};

    static Measurement phase(double v) { return {Kind::Phase, v}; }
    static Measurement intensity(double v) { return {Kind::Intensity, v}; }
};

struct FluxSystem {
    IntMatrix winding;  ///< rows = measurements, columns = obstacles
    std::vector<Measurement> betas;
    /// Optional uniform phase-noise bound added to the residual tolerance.
    double noise_bound{0.0};

    std::size_t rows() const { return winding.size(); }
    std::size_t columns() const { return winding.empty() ? 0 : winding.front().size(); }
    /// Throws DataError on ragged or empty matrices or a row/measurement count mismatch.
    void validate() const;
    /// Throws DataError unless row k equals the winding vector of loops[k] in `scene`.
    void validate_against(const Scene& scene, const std::vector<Loop>& loops) const;
};

struct FluxEstimate {
    /// One admissible solution, each entry in [0, 2 pi).
    std::vector<double> alphas;
    /// Per-obstacle admissible representatives (a single entry when unambiguous).
    std::vector<std::vector<double>> ambiguity;
    /// Every admissible joint solution.
    std::vector<std::vector<double>> solutions;
    /// Largest residual of N alpha against the measurements (phase rows mod 2 pi, intensity rows in intensity).
    double max_residual{0.0};

    bool ambiguous() const { return solutions.size() > 1; }
};

/// Smith normal form U A V = D with U, V unimodular and d_1 | d_2 | ... on the diagonal.
struct SmithForm {
    IntMatrix u;
    IntMatrix v;
    std::vector<long long> diagonal;  ///< length min(rows, cols), nonnegative
};
SmithForm smith_normal_form(const IntMatrix& a);

/// Candidates {2 arcsin(sqrt(I) / 2), 2 pi - same} in [0, 2 pi), a single value at I = 0 or 4.
/// Values within 1e-9 outside [0, 4] are clamped; anything further out throws DataError.
std::vector<double> invert_intensity(double intensity);

/// Solves N alpha = beta (mod 2 pi) for phase measurements. Throws RankDeficientError when
/// some flux combination is unobservable, AmbiguityError (listing the coset) when the
/// elementary divisors multiply to more than 1, and ConsistencyError when the rows disagree
/// beyond `tolerance` + noise_bound.
FluxEstimate solve_mod2pi(const FluxSystem& system, double tolerance = 1e-8);

/// As solve_mod2pi, but intensity rows are expanded into both sign choices and the
/// admissible sets are intersected across measurements.
FluxEstimate solve_measurements(const FluxSystem& system, double tolerance = 1e-8);

/// Two beams and the closing segment; beam 1 may reflect.
struct Circuit {
    BeamSpec beam1;
    BeamSpec beam2;
    std::vector<Vec2> vertices;  ///< anchor1, reflection points, meeting point, anchor2
    std::vector<int> winding;
    bool broken{false};

    Loop loop() const { return Loop::polygon(vertices); }
};

struct DesignOptions {
    /// Straight beams and closing segments keep this distance from every obstacle,
    /// as a fraction of the smallest radius. Reflected legs only need to miss obstacles.
    double clearance_fraction{0.25};
    /// Random candidates tried for broken-ray circuits.
    int broken_candidates{20000};
    std::uint64_t seed{1};
};

struct MeasurementDesign {
    std::vector<Circuit> circuits;
    IntMatrix winding;
};

/// Circuits whose winding matrix is unimodular: isolating straight-beam triangles where
/// they exist, otherwise cluster circuits plus broken-ray circuits. Throws
/// DesignFailureError when no unimodular set is found.
MeasurementDesign design_measurements(const Scene& scene, const DesignOptions& options = {});

using MeasurementOracle = std::function<Measurement(const Circuit&)>;

/// Circuit phase from the geometric-optics pipeline (predict_two_beam alpha).
MeasurementOracle go_phase_oracle(const Scene& scene, double rel_tol = 1e-10);
/// Circuit intensity 4 sin^2(alpha / 2) from the geometric-optics pipeline.
MeasurementOracle go_intensity_oracle(const Scene& scene, double rel_tol = 1e-10);

/// design_measurements, one oracle call per circuit, then solve_measurements.
FluxEstimate recover(const Scene& scene, const MeasurementOracle& oracle, const DesignOptions& options = {},
                     double tolerance = 1e-8);

}  // namespace ablab
