#pragma once

#include <functional>
#include <vector>

#include "ablab/gauge_field.hpp"
#include "ablab/geometry.hpp"

namespace ablab {

/// Even window that is 1 on |t| < 1/2, 0 on |t| > 1 and smooth in between.
class CutoffProfile {
public:
    /// Default: C-infinity bump built from exp(-1/u).
    CutoffProfile();
    explicit CutoffProfile(std::function<double(double)> profile);

    double operator()(double t) const { return profile_(t); }

private:
    std::function<double(double)> profile_;
};

/// One collimated beam: where it starts, where it points, how wide it is.
struct BeamSpec {
    Vec2 anchor;
    Vec2 direction;
    double transverse_width{1.0};   ///< delta_1
    double longitudinal_width{1.0}; ///< delta_2
    double wavenumber{1.0};         ///< k; the carrier is exp(i m k omega.x / hbar)
    CutoffProfile cutoff{};
    /// Reflections the beam may take before reaching the meeting point (0 = straight).
    int max_reflections{0};

    /// Throws DomainError on non-positive widths or wavenumber, or a non-unit direction.
    void validate() const;
};

struct GOPrediction {
    double phase_1{0.0};            ///< I1: phase along beam 1 from its anchor to the meeting point
    double phase_2{0.0};            ///< I2: same for beam 2
    double closing_correction{0.0}; ///< I3: phase along the straight closure anchor2 -> anchor1
    double alpha{0.0};              ///< I1 - I2 + I3
    double intensity{0.0};          ///< 4 sin^2(alpha / 2)
    std::vector<int> winding;       ///< winding of the closed circuit around each obstacle
    Vec2 meeting_point;
    BrokenRay beam_1_path;          ///< beam 1 legs, truncated at the meeting point
};

/// Phase accumulated by a ray arriving at `x` from infinity along `direction`:
/// (e / hbar c) * integral_0^inf direction . A(x - s direction) ds.
/// Throws GeometryError when the incoming ray crosses an obstacle.
double straight_ray_phase(const VectorPotential& potential, const Vec2& x, const Vec2& direction,
                          double rel_tol);

/// Phase accumulated along all legs of a broken ray.
double broken_ray_phase(const VectorPotential& potential, const BrokenRay& ray, double rel_tol);

/// k_n with (m k_n / hbar) x0 . (omega - theta) = 2 pi n.
/// Throws GeometryError when x0 . (omega - theta) vanishes.
double matched_wavenumber(const Vec2& x0, const Vec2& omega, const Vec2& theta, int n,
                          const PhysicalConstants& constants);

/// 4 sin^2(alpha / 2).
double interference_intensity(double alpha);

/// Leading-order two-beam prediction. Beam 1 may reflect (up to its max_reflections);
/// beam 2 is straight. The circuit is beam 1, beam 2 reversed, and the closing
/// segment from anchor 2 back to anchor 1.
GOPrediction predict_two_beam(const Scene& scene, const VectorPotential& potential,
                              const BeamSpec& beam1, const BeamSpec& beam2, double rel_tol);

/// Circuit loop of a prediction: anchor1, reflection points, meeting point, anchor2.
Loop prediction_circuit(const GOPrediction& prediction, const Vec2& anchor2);

}  // namespace ablab
