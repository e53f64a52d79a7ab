#include "ablab/go_engine.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "ablab/errors.hpp"

namespace ablab {

namespace {

double bump_ramp(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

double smooth_cutoff(double t) {
    const double a = std::abs(t);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    const double s = 2.0 * (a - 0.5);
    const double up = bump_ramp(1.0 - s);
    return up / (up + bump_ramp(s));
}

// Parameters (s, u) with p + s d = q + u e, if the lines are not parallel.
std::optional<std::pair<double, double>> line_intersection(const Vec2& p, const Vec2& d,
                                                           const Vec2& q, const Vec2& e) {
    const double denom = cross(d, e);
    if (std::abs(denom) < 1e-14) return std::nullopt;
    const Vec2 w = q - p;
    return std::make_pair(cross(w, e) / denom, cross(w, d) / denom);
}

void check_clear_segment(const Scene& scene, const Vec2& a, const Vec2& b, const char* what) {
    for (const auto& d : scene.obstacles()) {
        if (segment_distance(d.center, a, b) < d.radius * (1.0 - 1e-9)) {
            throw GeometryError(std::string(what) + " crosses an obstacle");
        }
    }
}

}  // namespace

CutoffProfile::CutoffProfile() : profile_(smooth_cutoff) {}

CutoffProfile::CutoffProfile(std::function<double(double)> profile)
    : profile_(std::move(profile)) {}

void BeamSpec::validate() const {
    if (!(transverse_width > 0.0) || !(longitudinal_width > 0.0) || !(wavenumber > 0.0)) {
        throw DomainError("beam widths and wavenumber must be positive");
    }
    if (std::abs(norm(direction) - 1.0) > 1e-12) throw DomainError("beam direction must be unit");
    if (max_reflections < 0) throw DomainError("max_reflections must be non-negative");
}

double straight_ray_phase(const VectorPotential& potential, const Vec2& x, const Vec2& direction,
                          double rel_tol) {
    const HalfLine incoming{x, -direction};
    for (const auto& d : potential.obstacles()) {
        if (distance_to_piece(incoming, d.center) < d.radius) {
            throw GeometryError("incoming ray crosses an obstacle; use broken_ray_phase");
        }
    }
    // The half-line runs against the direction of travel.
    return -line_integral(potential, Path{incoming}, rel_tol);
}

double broken_ray_phase(const VectorPotential& potential, const BrokenRay& ray, double rel_tol) {
    const Path path = to_path(ray);
    if (path.empty()) return 0.0;
    return line_integral(potential, path, rel_tol);
}

double matched_wavenumber(const Vec2& x0, const Vec2& omega, const Vec2& theta, int n,
                          const PhysicalConstants& constants) {
    constants.validate();
    const double projection = dot(x0, omega - theta);
    if (std::abs(projection) < 1e-14) {
        throw GeometryError("x0 . (omega - theta) = 0: every wavenumber matches");
    }
    return 2.0 * std::numbers::pi * n * constants.hbar / (constants.mass * projection);
}

double interference_intensity(double alpha) {
    const double s = std::sin(0.5 * alpha);
    return 4.0 * s * s;
}

GOPrediction predict_two_beam(const Scene& scene, const VectorPotential& potential,
                              const BeamSpec& beam1, const BeamSpec& beam2, double rel_tol) {
    beam1.validate();
    beam2.validate();
    if (std::abs(beam1.wavenumber - beam2.wavenumber) > 1e-12 * beam1.wavenumber) {
        throw GeometryError("both beams must share one wavenumber");
    }

    const BrokenRay path1 =
        trace_broken_ray(beam1.anchor, beam1.direction, scene, beam1.max_reflections);

    const Ray ray2(beam2.anchor, beam2.direction);
    const auto hit2 = ray_hit(ray2, scene);
    const double reach2 = hit2 ? hit2->distance : bound_exit_distance(ray2, scene.bound());

    // First crossing of beam 1's legs with the unobstructed part of beam 2.
    std::optional<std::pair<std::size_t, double>> meet;
    double meet_u = 0.0;
    for (std::size_t p = 0; p < path1.legs.size() && !meet; ++p) {
        const Leg& leg = path1.legs[p];
        const auto st = line_intersection(leg.start, leg.direction, beam2.anchor, beam2.direction);
        if (!st) continue;
        const auto [s, u] = *st;
        const double eps = 1e-12 * std::max(1.0, leg.length);
        if (s > eps && s <= leg.length && u > eps && u <= reach2) {
            meet = std::make_pair(p, s);
            meet_u = u;
        }
    }
    if (!meet) throw GeometryError("beams do not meet in the obstacle-free region");

    GOPrediction out;
    out.beam_1_path.legs.assign(path1.legs.begin(), path1.legs.begin() + meet->first + 1);
    out.beam_1_path.legs.back().length = meet->second;
    out.beam_1_path.reflection_points.assign(path1.reflection_points.begin(),
                                             path1.reflection_points.begin() + meet->first);
    out.beam_1_path.reflecting_obstacles.assign(path1.reflecting_obstacles.begin(),
                                                path1.reflecting_obstacles.begin() + meet->first);
    for (const auto& leg : out.beam_1_path.legs) out.beam_1_path.total_length += leg.length;
    out.meeting_point = beam2.anchor + beam2.direction * meet_u;

    check_clear_segment(scene, beam2.anchor, beam1.anchor, "closing segment");

    out.phase_1 = broken_ray_phase(potential, out.beam_1_path, rel_tol);
    out.phase_2 = line_integral(potential, Path{Segment{beam2.anchor, out.meeting_point}}, rel_tol);
    out.closing_correction =
        line_integral(potential, Path{Segment{beam2.anchor, beam1.anchor}}, rel_tol);
    out.alpha = out.phase_1 - out.phase_2 + out.closing_correction;
    out.intensity = interference_intensity(out.alpha);
    out.winding = winding_numbers(prediction_circuit(out, beam2.anchor), scene);
    return out;
}

Loop prediction_circuit(const GOPrediction& prediction, const Vec2& anchor2) {
    std::vector<Vec2> vertices;
    vertices.push_back(prediction.beam_1_path.legs.front().start);
    for (const auto& p : prediction.beam_1_path.reflection_points) vertices.push_back(p);
    vertices.push_back(prediction.meeting_point);
    vertices.push_back(anchor2);
    return Loop::polygon(vertices);
}

}  // namespace ablab
