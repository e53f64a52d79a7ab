#include "ablab/gauge_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ablab/errors.hpp"
#include "ablab/quadrature.hpp"

namespace ablab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInteriorSlack = 1e-9;

void check_rel_tol(double rel_tol) {
    if (!(rel_tol > 1e-14 && rel_tol < 1e-2)) {
        throw DomainError("rel_tol must lie in (1e-14, 1e-2)");
    }
}

void check_path_clear(const Path& path, const std::vector<Disk>& obstacles) {
    for (const auto& piece : path) {
        for (std::size_t j = 0; j < obstacles.size(); ++j) {
            const Disk& d = obstacles[j];
            if (distance_to_piece(piece, d.center) < d.radius * (1.0 - kInteriorSlack)) {
                throw DomainError("integration path enters obstacle " + std::to_string(j));
            }
        }
    }
}

// Integral of `form` along one finite piece.
double piece_integral(const std::function<Vec2(Vec2)>& form, const PathPiece& piece,
                      double abs_tol, double rel_tol) {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Segment>) {
                const Vec2 d = p.b - p.a;
                return integrate([&](double t) { return dot(form(p.a + d * t), d); }, 0.0, 1.0,
                                 abs_tol, rel_tol)
                    .value;
            } else if constexpr (std::is_same_v<T, Arc>) {
                return integrate(
                           [&](double phi) {
                               const Vec2 tangent{-std::sin(phi) * p.radius,
                                                  std::cos(phi) * p.radius};
                               return dot(form(p.point_at(phi)), tangent);
                           },
                           p.start_angle, p.start_angle + p.sweep, abs_tol, rel_tol)
                    .value;
            } else {
                throw DomainError("half-lines need a potential with a tail bound");
            }
        },
        piece);
}

}  // namespace

void PhysicalConstants::validate() const {
    for (double v : {hbar, mass, charge, light_speed}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DomainError("physical constants must be finite and positive");
        }
    }
}

VectorPotential::VectorPotential(PhysicalConstants constants, std::vector<Disk> obstacles,
                                 std::vector<Solenoid> solenoids)
    : constants_(constants), obstacles_(std::move(obstacles)), solenoids_(std::move(solenoids)) {
    constants_.validate();
}

VectorPotential VectorPotential::from_field(std::function<Vec2(Vec2)> field,
                                            PhysicalConstants constants,
                                            std::vector<Disk> obstacles) {
    VectorPotential out(constants, std::move(obstacles), {});
    out.free_field_ = std::move(field);
    return out;
}

Vec2 VectorPotential::phase_gradient_unchecked(const Vec2& p) const {
    Vec2 g{};
    for (const auto& s : solenoids_) {
        if (s.flux == 0.0) continue;
        const Vec2 r = p - s.center;
        g += perp(r) * (s.flux / (kTwoPi * dot(r, r)));
    }
    for (const auto& term : gauge_terms_) g += term.gradient(p);
    if (free_field_) g += free_field_(p) * constants_.magnetic_phase_factor();
    return g;
}

Vec2 VectorPotential::phase_gradient(const Vec2& p) const {
    for (std::size_t j = 0; j < obstacles_.size(); ++j) {
        const Disk& d = obstacles_[j];
        if (norm(p - d.center) < d.radius * (1.0 - kInteriorSlack)) {
            throw DomainError("vector potential is undefined inside obstacle " + std::to_string(j));
        }
    }
    return phase_gradient_unchecked(p);
}

Vec2 VectorPotential::operator()(const Vec2& p) const {
    return phase_gradient(p) / constants_.magnetic_phase_factor();
}

double VectorPotential::edge_phase(const Vec2& a, const Vec2& b) const {
    double phase = 0.0;
    for (const auto& s : solenoids_) {
        if (s.flux != 0.0) phase += s.flux / kTwoPi * subtended_angle(s.center, a, b);
    }
    for (const auto& term : gauge_terms_) phase += term.phase(b) - term.phase(a);
    if (free_field_) {
        const double factor = constants_.magnetic_phase_factor();
        const Vec2 d = b - a;
        phase += integrate([&](double t) { return factor * dot(free_field_(a + d * t), d); }, 0.0,
                           1.0, 1e-14, 1e-13)
                     .value;
    }
    return phase;
}

bool VectorPotential::decays_at_infinity() const {
    if (free_field_) return false;
    return std::all_of(gauge_terms_.begin(), gauge_terms_.end(),
                       [](const GaugeTerm& t) { return t.support.has_value(); });
}

std::vector<double> VectorPotential::fluxes() const {
    std::vector<double> out;
    out.reserve(solenoids_.size());
    for (const auto& s : solenoids_) out.push_back(s.flux);
    return out;
}

VectorPotential VectorPotential::with_gauge_term(GaugeTerm term) const {
    VectorPotential out = *this;
    out.gauge_terms_.push_back(std::move(term));
    return out;
}

VectorPotential ab_potential(const Scene& scene, const PhysicalConstants& constants) {
    std::vector<Solenoid> solenoids;
    solenoids.reserve(scene.size());
    for (const auto& d : scene.obstacles()) solenoids.push_back({d.center, d.flux});
    return VectorPotential(constants, scene.obstacles(), std::move(solenoids));
}

double one_form_integral(const std::function<Vec2(Vec2)>& form, const Path& path, double abs_tol) {
    double total = 0.0;
    const double piece_tol = abs_tol / static_cast<double>(std::max<std::size_t>(path.size(), 1));
    for (const auto& piece : path) total += piece_integral(form, piece, piece_tol, 0.0);
    return total;
}

double half_line_cutoff(const VectorPotential& potential, const HalfLine& ray, double tail_tol) {
    if (!potential.decays_at_infinity()) {
        throw DomainError("semi-infinite integral needs a potential that decays at infinity");
    }
    if (!(tail_tol > 0.0)) throw DomainError("tail tolerance must be positive");
    const auto& solenoids = potential.solenoids();
    const double active = static_cast<double>(std::max<std::size_t>(
        std::count_if(solenoids.begin(), solenoids.end(), [](const Solenoid& s) { return s.flux != 0.0; }),
        1));
    double cutoff = 1.0;
    for (const auto& s : solenoids) {
        const Vec2 rel = s.center - ray.origin;
        const double along = dot(rel, ray.direction);
        const double offset = std::abs(cross(ray.direction, rel));
        cutoff = std::max(cutoff, along + offset + 1.0);
        if (s.flux == 0.0) continue;
        // Tail of b / (b^2 + (s - s_j)^2) beyond S is below b / (S - s_j).
        cutoff = std::max(cutoff, along + active * std::abs(s.flux) * offset / (kTwoPi * tail_tol));
    }
    for (const auto& term : potential.gauge_terms()) {
        const Disk& sup = *term.support;
        cutoff = std::max(cutoff, dot(sup.center - ray.origin, ray.direction) + sup.radius + 1.0);
    }
    return cutoff;
}

double truncated_half_line_phase(const VectorPotential& potential, const HalfLine& ray,
                                 double cutoff, double abs_tol) {
    // Geometric panels keep the adaptive rule from stepping over the near-field peak.
    double scale = 1.0;
    for (const auto& s : potential.solenoids()) {
        scale = std::max(scale, std::abs(dot(s.center - ray.origin, ray.direction)) +
                                    std::abs(cross(ray.direction, s.center - ray.origin)));
    }
    std::vector<double> knots{0.0};
    for (double s = std::min(scale, cutoff); s < cutoff; s *= 2.0) knots.push_back(s);
    knots.push_back(cutoff);
    const double panel_tol = abs_tol / static_cast<double>(knots.size() - 1);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        total += integrate(
                     [&](double s) {
                         return dot(potential.phase_gradient(ray.origin + ray.direction * s),
                                    ray.direction);
                     },
                     knots[k], knots[k + 1], panel_tol, 0.0)
                     .value;
    }
    return total;
}

double line_integral(const VectorPotential& potential, const Path& path, double rel_tol) {
    check_rel_tol(rel_tol);
    check_path_clear(path, potential.obstacles());
    const double piece_tol = rel_tol / static_cast<double>(std::max<std::size_t>(path.size(), 1));
    const auto form = [&](Vec2 p) { return potential.phase_gradient(p); };
    double total = 0.0;
    for (const auto& piece : path) {
        if (const auto* ray = std::get_if<HalfLine>(&piece)) {
            const double cutoff = half_line_cutoff(potential, *ray, 0.5 * piece_tol);
            total += truncated_half_line_phase(potential, *ray, cutoff, 0.5 * piece_tol);
        } else {
            total += piece_integral(form, piece, piece_tol, rel_tol);
        }
    }
    return total;
}

double loop_flux(const VectorPotential& potential, const Loop& loop, double rel_tol) {
    return line_integral(potential, to_path(loop), rel_tol);
}

VectorPotential gauge_transform(const VectorPotential& potential,
                                std::function<double(Vec2)> phase,
                                std::function<Vec2(Vec2)> grad_phase, std::optional<Disk> support) {
    return potential.with_gauge_term({std::move(phase), std::move(grad_phase), support});
}

double curl_at(const VectorPotential& potential, const Vec2& point, double h) {
    if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
    for (std::size_t j = 0; j < potential.obstacles().size(); ++j) {
        const Disk& d = potential.obstacles()[j];
        if (norm(point - d.center) - d.radius <= h * std::numbers::sqrt2) {
            throw DomainError("curl stencil clips obstacle " + std::to_string(j));
        }
    }
    const Vec2 ex{h, 0.0};
    const Vec2 ey{0.0, h};
    const double dA2dx = (potential(point + ex).y - potential(point - ex).y) / (2.0 * h);
    const double dA1dy = (potential(point + ey).x - potential(point - ey).x) / (2.0 * h);
    return dA2dx - dA1dy;
}

double electromagnetic_flux(const SpacetimePotential& potential, const SpacetimeLoop& loop,
                            double rel_tol) {
    check_rel_tol(rel_tol);
    potential.constants.validate();
    if (loop.size() < 2) throw DomainError("spacetime loop needs at least two vertices");
    const auto& c = potential.constants;
    const double magnetic = c.charge / (c.hbar * c.light_speed);
    const double electric = c.charge / c.hbar;
    const double piece_tol = rel_tol / static_cast<double>(loop.size());
    double total = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const SpacetimePoint& p0 = loop[i];
        const SpacetimePoint& p1 = loop[(i + 1) % loop.size()];
        for (std::size_t j = 0; j < potential.obstacles.size(); ++j) {
            const Disk& d = potential.obstacles[j];
            if (segment_distance(d.center, p0.x, p1.x) < d.radius * (1.0 - kInteriorSlack)) {
                throw DomainError("spacetime loop enters obstacle " + std::to_string(j));
            }
        }
        const Vec2 dx = p1.x - p0.x;
        const double dt = p1.t - p0.t;
        total += integrate(
                     [&](double u) {
                         const Vec2 x = p0.x + dx * u;
                         const double t = p0.t + dt * u;
                         double f = 0.0;
                         if (dx.x != 0.0 || dx.y != 0.0) {
                             f += magnetic * dot(potential.magnetic(x, t), dx);
                         }
                         if (dt != 0.0) f -= electric * potential.electric(x, t) * dt;
                         return f;
                     },
                     0.0, 1.0, piece_tol, rel_tol)
                     .value;
    }
    return total;
}

double gravitational_flux(const StationaryMetric& metric, const Loop& loop, double rel_tol) {
    check_rel_tol(rel_tol);
    const auto form = [&](Vec2 p) {
        const double g00 = metric.g00(p);
        if (!(g00 > 0.0)) throw DomainError("g00 must be positive along the loop");
        return metric.g0j(p) / g00;
    };
    return one_form_integral(form, to_path(loop), rel_tol);
}

}  // namespace ablab
