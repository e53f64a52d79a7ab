#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "ablab/vec2.hpp"

namespace ablab {

/// Circular obstacle. `flux` is the enclosed gauge phase in radians; geometry ignores it.
struct Disk {
    Vec2 center;
    double radius{1.0};
    double flux{0.0};
};

struct Box {
    Vec2 min;
    Vec2 max;

    bool contains(const Vec2& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
};

/// Planar domain: the exterior of a set of pairwise disjoint disks, clipped to a box.
///
/// Rays leaving the box are treated as having escaped to infinity.
class Scene {
public:
    /// Throws DomainError if disks overlap, touch, or poke out of the bound.
    Scene(std::vector<Disk> obstacles, Box bound);

    const std::vector<Disk>& obstacles() const { return obstacles_; }
    const Box& bound() const { return bound_; }
    std::size_t size() const { return obstacles_.size(); }

    std::vector<double> fluxes() const;

    /// Same geometry, new fluxes (one per obstacle).
    Scene with_fluxes(const std::vector<double>& fluxes) const;

    /// Index of the obstacle whose open interior contains `p`, if any.
    std::optional<std::size_t> obstacle_containing(const Vec2& p) const;

    /// Distance from `p` to the nearest obstacle boundary (negative inside).
    double clearance(const Vec2& p) const;

private:
    std::vector<Disk> obstacles_;
    Box bound_;
};

struct Ray {
    Vec2 origin;
    Vec2 direction;

    /// Throws DomainError unless |direction| = 1 within 1e-12.
    Ray(Vec2 origin_, Vec2 direction_);
};

struct Hit {
    Vec2 point;
    double distance{0.0};
    Vec2 outward_normal;
    std::size_t obstacle_index{0};
};

struct Leg {
    Vec2 start;
    Vec2 direction;
    double length{0.0};

    Vec2 end() const { return start + direction * length; }
};

/// Polyline of straight legs joined by specular reflections off obstacles.
struct BrokenRay {
    std::vector<Leg> legs;
    std::vector<Vec2> reflection_points;
    std::vector<std::size_t> reflecting_obstacles;
    double total_length{0.0};
    /// True when the final leg ends on the scene bound.
    bool escaped{false};

    Vec2 end() const { return legs.empty() ? Vec2{} : legs.back().end(); }
};

// Path primitives shared by loops and line integrals.

struct Segment {
    Vec2 a;
    Vec2 b;
};

/// Circular arc starting at polar angle `start_angle`, sweeping `sweep` radians (ccw positive).
struct Arc {
    Vec2 center;
    double radius{1.0};
    double start_angle{0.0};
    double sweep{0.0};

    Vec2 point_at(double angle) const { return center + from_angle(angle) * radius; }
    Vec2 start() const { return point_at(start_angle); }
    Vec2 end() const { return point_at(start_angle + sweep); }
};

/// Semi-infinite straight path {origin + s * direction : s >= 0}.
struct HalfLine {
    Vec2 origin;
    Vec2 direction;
};

using LoopPiece = std::variant<Segment, Arc>;
using PathPiece = std::variant<Segment, Arc, HalfLine>;

Vec2 piece_start(const LoopPiece& piece);
Vec2 piece_end(const LoopPiece& piece);

/// Closed curve made of segments and arcs; counterclockwise is positive.
class Loop {
public:
    /// Throws DomainError if the pieces do not chain or the curve is not closed (1e-12).
    explicit Loop(std::vector<LoopPiece> pieces);

    static Loop circle(const Vec2& center, double radius, bool counterclockwise = true);
    static Loop polygon(const std::vector<Vec2>& vertices);

    const std::vector<LoopPiece>& pieces() const { return pieces_; }

    Loop reversed() const;

    /// Joins two loops sharing a base point (end of this = start of other).
    Loop concatenated(const Loop& other) const;

    /// Dense sample of points along the loop (for plotting and cross-checks).
    std::vector<Vec2> sample(std::size_t points_per_piece) const;

private:
    std::vector<LoopPiece> pieces_;
};

/// Open or closed path; allows a trailing half-line.
using Path = std::vector<PathPiece>;

Path to_path(const Loop& loop);

/// Distance from `p` to a path piece.
double distance_to_piece(const PathPiece& piece, const Vec2& p);
Path to_path(const BrokenRay& ray);

/// Nearest obstacle hit along the ray, or nothing when the ray leaves the bound first.
/// Throws DomainError if the origin is inside an obstacle or outside the bound.
std::optional<Hit> ray_hit(const Ray& ray, const Scene& scene);

/// Distance along the ray to the scene bound.
double bound_exit_distance(const Ray& ray, const Box& bound);

/// Specular reflection d - 2 (d.n) n. Throws GrazingRayError when |d.n| < 1e-12.
Vec2 reflect(const Vec2& direction, const Vec2& normal);

/// Follows a ray through specular reflections until it leaves the bound.
/// Throws ReflectionBudgetError if it is still trapped after `max_reflections`.
BrokenRay trace_broken_ray(const Vec2& start, const Vec2& direction, const Scene& scene,
                           int max_reflections);

/// Winding number of `loop` around `point` (which must not lie on the loop).
int winding_number(const Loop& loop, const Vec2& point);

/// Winding numbers of the loop around every obstacle center.
/// Throws DomainError if the loop enters an obstacle interior.
std::vector<int> winding_numbers(const Loop& loop, const Scene& scene);

}  // namespace ablab
