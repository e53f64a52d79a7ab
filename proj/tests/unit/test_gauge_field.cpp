#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ablab/errors.hpp"
#include "ablab/gauge_field.hpp"
#include "generators.hpp"

using namespace ablab;

namespace {
constexpr double kPi = std::numbers::pi;

Scene three_disks(double a1, double a2, double a3) {
    return Scene({Disk{{-3, 0}, 0.7, a1}, Disk{{3, 0}, 0.7, a2}, Disk{{0, 4}, 0.7, a3}},
                 Box{{-30, -30}, {30, 30}});
}
}  // namespace

TEST_CASE("half circle around one solenoid") {
    const Scene scene({Disk{{0, 0}, 1.0, kPi}}, Box{{-10, -10}, {10, 10}});
    const VectorPotential a = ab_potential(scene);
    CHECK(std::abs(line_integral(a, Path{Arc{{0, 0}, 2.0, 0.0, kPi}}, 1e-12) - kPi / 2) < 1e-11);
    CHECK(std::abs(loop_flux(a, Loop::circle({0, 0}, 3.0), 1e-12) - kPi) < 1e-11);
    CHECK(std::abs(loop_flux(a, Loop::circle({5, 5}, 2.0), 1e-12)) < 1e-11);
    CHECK_THROWS_AS(a({0.5, 0.0}), DomainError);
    CHECK_THROWS_AS(line_integral(a, Path{Segment{{-3, 0}, {3, 0}}}, 1e-10), DomainError);
    CHECK_THROWS_AS(line_integral(a, Path{Segment{{-3, 2}, {3, 2}}}, 1e-15), DomainError);
    CHECK_THROWS_AS(line_integral(a, Path{Segment{{-3, 2}, {3, 2}}}, 0.1), DomainError);
}

TEST_CASE("physical units scale A but not the phase") {
    PhysicalConstants c{2.0, 1.0, 3.0, 5.0};
    const Scene scene({Disk{{0, 0}, 1.0, 1.3}}, Box{{-10, -10}, {10, 10}});
    const VectorPotential a = ab_potential(scene, c);
    const Vec2 p{2.0, 1.0};
    const Vec2 g = a.phase_gradient(p);
    const Vec2 phys = a(p);
    CHECK(phys.x * c.magnetic_phase_factor() == doctest::Approx(g.x));
    CHECK(std::abs(loop_flux(a, Loop::circle({0, 0}, 2.0), 1e-12) - 1.3) < 1e-11);
    CHECK_THROWS_AS((PhysicalConstants{0.0, 1.0, 1.0, 1.0}.validate()), DomainError);
}

TEST_CASE("flux equals winding-weighted sum on random loops") {
    testing::Gen gen(7);
    const double rel = 1e-9;
    int checked = 0;
    for (int t = 0; t < 60; ++t) {
        const Scene scene = three_disks(gen.uniform(-7, 7), gen.uniform(-7, 7), gen.uniform(-7, 7));
        const VectorPotential a = ab_potential(scene);
        const Loop loop = Loop::polygon(gen.star_polygon({gen.uniform(-4, 4), gen.uniform(-2, 5)}, 1.0, 9.0, 8));
        std::vector<int> n;
        try {
            n = winding_numbers(loop, scene);
        } catch (const DomainError&) {
            continue;
        }
        double expect = 0.0;
        for (std::size_t j = 0; j < n.size(); ++j) expect += n[j] * scene.obstacles()[j].flux;
        CHECK(std::abs(loop_flux(a, loop, rel) - expect) <= 10 * rel * std::max(1.0, std::abs(expect)));
        ++checked;
    }
    CHECK(checked > 20);
}

TEST_CASE("gauge transforms leave loop fluxes unchanged") {
    const Scene scene = three_disks(1.0, -2.0, 0.5);
    const VectorPotential a = ab_potential(scene);
    const VectorPotential b = gauge_transform(
        a, [](Vec2 p) { return 0.7 * std::sin(p.x) * std::cos(0.5 * p.y); },
        [](Vec2 p) {
            return Vec2{0.7 * std::cos(p.x) * std::cos(0.5 * p.y), -0.35 * std::sin(p.x) * std::sin(0.5 * p.y)};
        });
    testing::Gen gen(8);
    for (int t = 0; t < 10; ++t) {
        const Loop loop = Loop::polygon(gen.star_polygon({0.0, 1.0}, 6.0, 9.0, 6));
        CHECK(std::abs(loop_flux(a, loop, 1e-10) - loop_flux(b, loop, 1e-10)) < 1e-8);
    }
    // Open paths pick up the endpoint difference of chi.
    const Vec2 p{-6, -6}, q{6, -5};
    const double diff = line_integral(b, Path{Segment{p, q}}, 1e-11) - line_integral(a, Path{Segment{p, q}}, 1e-11);
    const double chi = [](Vec2 x) { return 0.7 * std::sin(x.x) * std::cos(0.5 * x.y); }(q) -
                       [](Vec2 x) { return 0.7 * std::sin(x.x) * std::cos(0.5 * x.y); }(p);
    CHECK(std::abs(diff - chi) < 1e-9);
    // Exact edge phase agrees with quadrature.
    CHECK(std::abs(b.edge_phase(p, q) - line_integral(b, Path{Segment{p, q}}, 1e-11)) < 1e-9);
}

TEST_CASE("curl of test potentials") {
    const Scene scene = three_disks(1.0, 2.0, 3.0);
    const VectorPotential a = ab_potential(scene);
    CHECK(std::abs(curl_at(a, {1.0, -2.0}, 1e-3)) < 1e-6);
    CHECK(std::abs(curl_at(a, {25.0, 20.0}, 1e-4)) < 1e-8);
    CHECK_THROWS_AS(curl_at(a, {-3.0, 0.705}, 1e-2), DomainError);
    const VectorPotential u = VectorPotential::from_field([](Vec2 p) { return Vec2{-p.y / 2, p.x / 2}; });
    CHECK(curl_at(u, {0.3, -0.2}, 1e-3) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(loop_flux(u, Loop::circle({0, 0}, 2.0), 1e-12) - 4.0 * kPi) < 1e-10);

    // Second order in h.
    const Vec2 x{-1.4, 1.2};
    const double e1 = std::abs(curl_at(a, x, 0.02));
    const double e2 = std::abs(curl_at(a, x, 0.01));
    CHECK(e1 > 0.0);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("semi-infinite rays") {
    const Scene scene({Disk{{0, 0}, 1.0, 2.1}}, Box{{-10, -10}, {10, 10}});
    const VectorPotential a = ab_potential(scene);
    testing::Gen gen(9);
    for (int t = 0; t < 20; ++t) {
        const Vec2 x = from_angle(gen.angle()) * gen.uniform(2.0, 8.0);
        Vec2 d = gen.unit();
        if (segment_distance({0, 0}, x, x + d * 1e6) < 1.2) continue;
        // Angle swept from x out to infinity along d, seen from the solenoid.
        const double swept = std::atan2(cross(x, d), dot(x, d));
        const double exact = 2.1 / (2 * kPi) * swept;
        const double rel = 1e-9;
        CHECK(std::abs(line_integral(a, Path{HalfLine{x, d}}, rel) - exact) < 10 * rel);
        const double cut = half_line_cutoff(a, HalfLine{x, d}, rel);
        const double near = truncated_half_line_phase(a, HalfLine{x, d}, cut, 1e-13);
        const double far = truncated_half_line_phase(a, HalfLine{x, d}, 2 * cut, 1e-13);
        CHECK(std::abs(near - far) <= rel);
    }
    const VectorPotential u = VectorPotential::from_field([](Vec2 p) { return Vec2{-p.y / 2, p.x / 2}; });
    CHECK_THROWS_AS(line_integral(u, Path{HalfLine{{0, 0}, {1, 0}}}, 1e-8), DomainError);
}

TEST_CASE("electromagnetic flux") {
    const Scene scene = three_disks(0.9, -1.7, 2.3);
    const VectorPotential a = ab_potential(scene);
    const std::vector<Vec2> verts{{-6, -5}, {6, -5}, {6, 7}, {-6, 7}};
    SpacetimePotential st;
    st.magnetic = [&](Vec2 x, double) { return a(x); };
    st.electric = [](Vec2, double) { return 0.0; };
    st.obstacles = scene.obstacles();
    SpacetimeLoop flat;
    for (const Vec2& v : verts) flat.push_back({v, 0.0});
    CHECK(std::abs(electromagnetic_flux(st, flat, 1e-11) - loop_flux(a, Loop::polygon(verts), 1e-11)) < 1e-10);

    // Static field plus a time-dependent gauge term; the loop goes +1 around
    // obstacle 1 forward in time and -1 around obstacle 3 on the way back.
    const Scene wide({Disk{{-4, 0}, 0.8, 0.9}, Disk{{0, 0}, 0.5, -1.7}, Disk{{4, 0}, 0.8, 2.3}},
                     Box{{-20, -20}, {20, 20}});
    const VectorPotential w = ab_potential(wide);
    auto chi_grad = [](Vec2 x, double t) { return Vec2{std::cos(x.x + t) * std::cos(x.y), -std::sin(x.x + t) * std::sin(x.y)}; };
    auto chi_t = [](Vec2 x, double t) { return std::cos(x.x + t) * std::cos(x.y); };
    SpacetimePotential g;
    g.magnetic = [&](Vec2 x, double t) { return w(x) + chi_grad(x, t); };
    g.electric = [&](Vec2 x, double t) { return -chi_t(x, t); };
    g.obstacles = wide.obstacles();
    const SpacetimeLoop loop{{{0, 3}, 0.0},   {{-7, 3}, 0.2},  {{-7, -3}, 0.4}, {{-1.5, -3}, 0.6},
                             {{-1.5, 3}, 0.8}, {{0, 3}, 1.0},  {{7, 3}, 0.8},   {{7, -3}, 0.6},
                             {{1.5, -3}, 0.4}, {{1.5, 3}, 0.2}};
    CHECK(std::abs(electromagnetic_flux(g, loop, 1e-11) - (0.9 - 2.3)) < 1e-9);
}

TEST_CASE("gravitational flux") {
    StationaryMetric stat{[](Vec2 p) { return 1.0 + 0.3 * std::sin(p.x) * std::cos(p.y); },
                          [](Vec2) { return Vec2{}; }};
    CHECK(std::abs(gravitational_flux(stat, Loop::circle({0.3, 0.1}, 2.0), 1e-10)) < 1e-12);
    const double beta = 0.77;
    StationaryMetric ab{[](Vec2 p) { return 1.0 + 0.3 * std::sin(p.x) * std::cos(p.y); },
                        [beta](Vec2 p) {
                            const double g00 = 1.0 + 0.3 * std::sin(p.x) * std::cos(p.y);
                            return perp(p) * (g00 * beta / (2 * kPi * dot(p, p)));
                        }};
    CHECK(std::abs(gravitational_flux(ab, Loop::circle({0.3, 0.1}, 2.0), 1e-10) - beta) < 1e-8);
    StationaryMetric bad{[](Vec2 p) { return p.x; }, [](Vec2) { return Vec2{}; }};
    CHECK_THROWS_AS(gravitational_flux(bad, Loop::circle({0, 0}, 1.0), 1e-8), DomainError);
}
