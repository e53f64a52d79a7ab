#include "ablab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ablab/errors.hpp"

namespace ablab {

namespace {

constexpr double kUnitTol = 1e-12;
constexpr double kGrazingTol = 1e-12;
constexpr double kClosureTol = 1e-12;

// Self-intersection guard for rays leaving a reflection point.
double hit_epsilon(const Scene& scene) {
    const Box& b = scene.bound();
    const double extent = std::max(b.max.x - b.min.x, b.max.y - b.min.y);
    return 1e-11 * std::max(1.0, extent);
}

}  // namespace

Scene::Scene(std::vector<Disk> obstacles, Box bound)
    : obstacles_(std::move(obstacles)), bound_(bound) {
    if (!(bound_.max.x > bound_.min.x && bound_.max.y > bound_.min.y)) {
        throw DomainError("scene bound must have positive extent");
    }
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
        const Disk& d = obstacles_[i];
        if (!(d.radius > 0.0) || !std::isfinite(d.radius)) {
            throw DomainError("obstacle " + std::to_string(i) + " must have positive radius");
        }
        if (d.center.x - d.radius <= bound_.min.x || d.center.x + d.radius >= bound_.max.x ||
            d.center.y - d.radius <= bound_.min.y || d.center.y + d.radius >= bound_.max.y) {
            throw DomainError("obstacle " + std::to_string(i) + " is not strictly inside the bound");
        }
        for (std::size_t j = 0; j < i; ++j) {
            const Disk& e = obstacles_[j];
            if (norm(d.center - e.center) <= d.radius + e.radius) {
                throw DomainError("obstacles " + std::to_string(j) + " and " + std::to_string(i) +
                                  " overlap or touch");
            }
        }
    }
}

std::vector<double> Scene::fluxes() const {
    std::vector<double> out;
    out.reserve(obstacles_.size());
    for (const auto& d : obstacles_) out.push_back(d.flux);
    return out;
}

Scene Scene::with_fluxes(const std::vector<double>& fluxes) const {
    if (fluxes.size() != obstacles_.size()) {
        throw DomainError("flux vector length does not match obstacle count");
    }
    auto obstacles = obstacles_;
    for (std::size_t i = 0; i < obstacles.size(); ++i) obstacles[i].flux = fluxes[i];
    return Scene(std::move(obstacles), bound_);
}

std::optional<std::size_t> Scene::obstacle_containing(const Vec2& p) const {
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
        const Disk& d = obstacles_[i];
        if (norm(p - d.center) < d.radius * (1.0 - kUnitTol)) return i;
    }
    return std::nullopt;
}

double Scene::clearance(const Vec2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& d : obstacles_) best = std::min(best, norm(p - d.center) - d.radius);
    return best;
}

Ray::Ray(Vec2 origin_, Vec2 direction_) : origin(origin_), direction(direction_) {
    if (std::abs(norm(direction) - 1.0) > kUnitTol) {
        throw DomainError("ray direction must be a unit vector");
    }
}

Vec2 piece_start(const LoopPiece& piece) {
    return std::visit(
        [](const auto& p) -> Vec2 {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Segment>) return p.a;
            else return p.start();
        },
        piece);
}

Vec2 piece_end(const LoopPiece& piece) {
    return std::visit(
        [](const auto& p) -> Vec2 {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Segment>) return p.b;
            else return p.end();
        },
        piece);
}

Loop::Loop(std::vector<LoopPiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw DomainError("loop needs at least one piece");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        const Vec2 end = piece_end(pieces_[i]);
        const Vec2 next = piece_start(pieces_[(i + 1) % pieces_.size()]);
        const double scale = std::max(1.0, norm(end));
        if (norm(end - next) > kClosureTol * scale) {
            throw DomainError("loop pieces do not chain into a closed curve");
        }
    }
}

Loop Loop::circle(const Vec2& center, double radius, bool counterclockwise) {
    const double sweep = counterclockwise ? 2.0 * std::numbers::pi : -2.0 * std::numbers::pi;
    return Loop({Arc{center, radius, 0.0, sweep}});
}

Loop Loop::polygon(const std::vector<Vec2>& vertices) {
    if (vertices.size() < 2) throw DomainError("polygon needs at least two vertices");
    std::vector<LoopPiece> pieces;
    pieces.reserve(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        pieces.emplace_back(Segment{vertices[i], vertices[(i + 1) % vertices.size()]});
    }
    return Loop(std::move(pieces));
}

Loop Loop::reversed() const {
    std::vector<LoopPiece> out;
    out.reserve(pieces_.size());
    for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, Segment>) {
                    out.emplace_back(Segment{p.b, p.a});
                } else {
                    out.emplace_back(Arc{p.center, p.radius, p.start_angle + p.sweep, -p.sweep});
                }
            },
            *it);
    }
    return Loop(std::move(out));
}

Loop Loop::concatenated(const Loop& other) const {
    const Vec2 a = piece_start(pieces_.front());
    const Vec2 b = piece_start(other.pieces_.front());
    if (norm(a - b) > kClosureTol * std::max(1.0, norm(a))) {
        throw DomainError("concatenated loops must share their base point");
    }
    auto pieces = pieces_;
    pieces.insert(pieces.end(), other.pieces_.begin(), other.pieces_.end());
    return Loop(std::move(pieces));
}

std::vector<Vec2> Loop::sample(std::size_t points_per_piece) const {
    std::vector<Vec2> out;
    const std::size_t n = std::max<std::size_t>(points_per_piece, 1);
    for (const auto& piece : pieces_) {
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(n);
            std::visit(
                [&](const auto& p) {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, Segment>) out.push_back(p.a + (p.b - p.a) * t);
                    else out.push_back(p.point_at(p.start_angle + p.sweep * t));
                },
                piece);
        }
    }
    return out;
}

Path to_path(const Loop& loop) {
    Path path;
    for (const auto& piece : loop.pieces()) {
        std::visit([&](const auto& p) { path.emplace_back(p); }, piece);
    }
    return path;
}

Path to_path(const BrokenRay& ray) {
    Path path;
    for (const auto& leg : ray.legs) {
        if (leg.length > 0.0) path.emplace_back(Segment{leg.start, leg.end()});
    }
    return path;
}

double bound_exit_distance(const Ray& ray, const Box& bound) {
    double t = std::numeric_limits<double>::infinity();
    const auto axis = [&](double o, double d, double lo, double hi) {
        if (d > 0.0) t = std::min(t, (hi - o) / d);
        else if (d < 0.0) t = std::min(t, (lo - o) / d);
    };
    axis(ray.origin.x, ray.direction.x, bound.min.x, bound.max.x);
    axis(ray.origin.y, ray.direction.y, bound.min.y, bound.max.y);
    return std::max(t, 0.0);
}

std::optional<Hit> ray_hit(const Ray& ray, const Scene& scene) {
    if (!scene.bound().contains(ray.origin)) {
        throw DomainError("ray origin lies outside the scene bound");
    }
    if (auto inside = scene.obstacle_containing(ray.origin)) {
        throw DomainError("ray origin lies inside obstacle " + std::to_string(*inside));
    }
    const double eps = hit_epsilon(scene);
    std::optional<Hit> best;
    const auto& obstacles = scene.obstacles();
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const Disk& d = obstacles[i];
        const Vec2 oc = ray.origin - d.center;
        const double b = dot(ray.direction, oc);
        const double c = dot(oc, oc) - d.radius * d.radius;
        const double disc = b * b - c;
        if (disc < 0.0) continue;
        // Stable roots of t^2 + 2 b t + c = 0.
        const double q = -b - std::copysign(std::sqrt(disc), b);
        double t0 = q;
        double t1 = q != 0.0 ? c / q : -b;
        if (t0 > t1) std::swap(t0, t1);
        double t = t0 > eps ? t0 : (t1 > eps && c < 0.0 ? t1 : -1.0);
        if (t <= eps) continue;
        if (!best || t < best->distance) {
            const Vec2 p = ray.origin + ray.direction * t;
            best = Hit{p, t, normalized(p - d.center), i};
        }
    }
    if (best && best->distance > bound_exit_distance(ray, scene.bound())) return std::nullopt;
    return best;
}

Vec2 reflect(const Vec2& direction, const Vec2& normal) {
    const double dn = dot(direction, normal);
    if (std::abs(dn) < kGrazingTol) {
        throw GrazingRayError("tangential incidence: geometric optics breaks down at grazing");
    }
    if (dn > 0.0) throw DomainError("reflect expects an incoming direction (d.n < 0)");
    return normalized(direction - normal * (2.0 * dn));
}

BrokenRay trace_broken_ray(const Vec2& start, const Vec2& direction, const Scene& scene,
                           int max_reflections) {
    if (max_reflections < 0) throw DomainError("max_reflections must be non-negative");
    BrokenRay out;
    Vec2 origin = start;
    Vec2 dir = direction;
    int reflections = 0;
    while (true) {
        const Ray ray(origin, dir);
        const auto hit = ray_hit(ray, scene);
        if (!hit) {
            const double len = bound_exit_distance(ray, scene.bound());
            out.legs.push_back({origin, dir, len});
            out.total_length += len;
            out.escaped = true;
            return out;
        }
        if (reflections == max_reflections) {
            throw ReflectionBudgetError("ray still trapped after " + std::to_string(max_reflections) +
                                        " reflections");
        }
        out.legs.push_back({origin, dir, hit->distance});
        out.total_length += hit->distance;
        dir = reflect(dir, hit->outward_normal);
        origin = hit->point;
        out.reflection_points.push_back(hit->point);
        out.reflecting_obstacles.push_back(hit->obstacle_index);
        ++reflections;
    }
}

namespace {

// Angle swept around `c` by an arc, replacing sub-arcs by chords whenever the
// chord/arc sliver provably excludes `c`.
double arc_subtended(const Vec2& c, const Arc& arc, int depth) {
    const Vec2 a = arc.start();
    const Vec2 b = arc.end();
    const double half = 0.5 * std::abs(arc.sweep);
    const double sagitta = arc.radius * (1.0 - std::cos(half));
    if (half < std::numbers::pi / 4.0 && segment_distance(c, a, b) > sagitta) {
        return subtended_angle(c, a, b);
    }
    if (depth > 60) throw DomainError("point lies on the loop; winding number undefined");
    const double mid = 0.5 * arc.sweep;
    return arc_subtended(c, Arc{arc.center, arc.radius, arc.start_angle, mid}, depth + 1) +
           arc_subtended(c, Arc{arc.center, arc.radius, arc.start_angle + mid, arc.sweep - mid},
                         depth + 1);
}

double total_angle(const Loop& loop, const Vec2& c) {
    double sum = 0.0;
    for (const auto& piece : loop.pieces()) {
        sum += std::visit(
            [&](const auto& p) -> double {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, Segment>) {
                    if (segment_distance(c, p.a, p.b) == 0.0) {
                        throw DomainError("point lies on the loop; winding number undefined");
                    }
                    return subtended_angle(c, p.a, p.b);
                } else {
                    return arc_subtended(c, p, 0);
                }
            },
            piece);
    }
    return sum;
}

double piece_distance(const LoopPiece& piece, const Vec2& c) {
    return std::visit([&](const auto& p) { return distance_to_piece(PathPiece{p}, c); }, piece);
}

}  // namespace

double distance_to_piece(const PathPiece& piece, const Vec2& c) {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Segment>) {
                return segment_distance(c, p.a, p.b);
            } else if constexpr (std::is_same_v<T, HalfLine>) {
                const double s = std::max(0.0, dot(c - p.origin, p.direction));
                return norm(c - (p.origin + p.direction * s));
            } else {
                // Closest point on the arc: either the radial projection (if swept) or an endpoint.
                const Vec2 rel = c - p.center;
                double best = std::min(norm(c - p.start()), norm(c - p.end()));
                if (std::abs(p.sweep) >= 2.0 * std::numbers::pi) {
                    return std::abs(norm(rel) - p.radius);
                }
                const double phi = std::atan2(rel.y, rel.x);
                const double lo = std::min(p.start_angle, p.start_angle + p.sweep);
                const double span = std::abs(p.sweep);
                double off = std::fmod(phi - lo, 2.0 * std::numbers::pi);
                if (off < 0.0) off += 2.0 * std::numbers::pi;
                if (off <= span) best = std::min(best, std::abs(norm(rel) - p.radius));
                return best;
            }
        },
        piece);
}

int winding_number(const Loop& loop, const Vec2& point) {
    const double turns = total_angle(loop, point) / (2.0 * std::numbers::pi);
    const double rounded = std::round(turns);
    if (std::abs(turns - rounded) > 1e-6) {
        throw DomainError("winding angle is not a whole number of turns; loop not closed?");
    }
    return static_cast<int>(rounded);
}

std::vector<int> winding_numbers(const Loop& loop, const Scene& scene) {
    std::vector<int> out;
    out.reserve(scene.size());
    for (std::size_t j = 0; j < scene.size(); ++j) {
        const Disk& d = scene.obstacles()[j];
        for (const auto& piece : loop.pieces()) {
            if (piece_distance(piece, d.center) < d.radius * (1.0 - 1e-9)) {
                throw DomainError("loop enters obstacle " + std::to_string(j));
            }
        }
        out.push_back(winding_number(loop, d.center));
    }
    return out;
}

}  // namespace ablab
