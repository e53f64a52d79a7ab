#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ablab/errors.hpp"
#include "ablab/flux_recovery.hpp"
#include "ablab/gauge_field.hpp"
#include "generators.hpp"

using namespace ablab;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

double mod_distance(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

FluxSystem phases(IntMatrix n, std::vector<double> betas) {
    FluxSystem s;
    s.winding = std::move(n);
    for (double b : betas) s.betas.push_back(Measurement::phase(b));
    return s;
}

// Oracle: beta_k = N_k . alpha, but computed by quadrature around a polygon with the given windings.
std::vector<double> quadrature_betas(const Scene& scene, const std::vector<Loop>& loops) {
    const VectorPotential a = ab_potential(scene);
    std::vector<double> out;
    for (const Loop& l : loops) out.push_back(loop_flux(a, l, 1e-12));
    return out;
}

long long det(const IntMatrix& n) {
    if (n.size() == 1) return n[0][0];
    long long s = 0;
    for (std::size_t c = 0; c < n.size(); ++c) {
        IntMatrix minor;
        for (std::size_t r = 1; r < n.size(); ++r) {
            std::vector<long long> row;
            for (std::size_t k = 0; k < n.size(); ++k)
                if (k != c) row.push_back(n[r][k]);
            minor.push_back(row);
        }
        s += (c % 2 ? -1 : 1) * n[0][c] * det(minor);
    }
    return s;
}

IntMatrix random_unimodular(testing::Gen& g, std::size_t m) {
    IntMatrix n(m, std::vector<long long>(m, 0));
    for (std::size_t i = 0; i < m; ++i) n[i][i] = 1;
    for (int k = 0; k < 6; ++k) {
        const auto i = static_cast<std::size_t>(g.integer(0, static_cast<int>(m) - 1));
        const auto j = static_cast<std::size_t>(g.integer(0, static_cast<int>(m) - 1));
        if (i == j) continue;
        const int q = g.integer(-2, 2);
        for (std::size_t c = 0; c < m; ++c) n[i][c] += q * n[j][c];
    }
    return n;
}

std::vector<double> mat_vec(const IntMatrix& n, const std::vector<double>& a) {
    std::vector<double> b(n.size(), 0.0);
    for (std::size_t i = 0; i < n.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) b[i] += static_cast<double>(n[i][j]) * a[j];
    return b;
}

Box wide() { return Box{{-50, -50}, {50, 50}}; }
}  // namespace

TEST_CASE("invert intensity") {
    CHECK((invert_intensity(0.0) == std::vector<double>{0.0}));
    CHECK((invert_intensity(4.0) == std::vector<double>{kPi}));
    const auto two = invert_intensity(2.0);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == doctest::Approx(kPi / 2));
    CHECK(two[1] == doctest::Approx(3 * kPi / 2));
    CHECK((invert_intensity(-5e-10) == std::vector<double>{0.0}));
    CHECK((invert_intensity(4.0 + 5e-10) == std::vector<double>{kPi}));
    CHECK_THROWS_AS(invert_intensity(-1e-6), DataError);
    CHECK_THROWS_AS(invert_intensity(4.1), DataError);
    testing::Gen g(7);
    for (int k = 0; k < 50; ++k) {
        const double a = g.uniform(0.0, kTwoPi);
        const auto r = invert_intensity(interference_intensity(a));
        CHECK(std::min(mod_distance(r[0], a), mod_distance(r[1], a)) < 1e-7);
    }
}

TEST_CASE("smith normal form") {
    testing::Gen g(11);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t r = static_cast<std::size_t>(g.integer(1, 4));
        const std::size_t c = static_cast<std::size_t>(g.integer(1, 4));
        IntMatrix a(r, std::vector<long long>(c));
        for (auto& row : a)
            for (auto& v : row) v = g.integer(-4, 4);
        const SmithForm sf = smith_normal_form(a);
        // U A V == diag
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                long long s = 0;
                for (std::size_t p = 0; p < r; ++p)
                    for (std::size_t q = 0; q < c; ++q) s += sf.u[i][p] * a[p][q] * sf.v[q][j];
                CHECK(s == (i == j ? sf.diagonal[i] : 0));
            }
        CHECK(std::llabs(det(sf.u)) == 1);
        CHECK(std::llabs(det(sf.v)) == 1);
        for (std::size_t k = 0; k + 1 < sf.diagonal.size(); ++k) {
            CHECK(sf.diagonal[k] >= 0);
            if (sf.diagonal[k] != 0) CHECK(sf.diagonal[k + 1] % sf.diagonal[k] == 0);
            else CHECK(sf.diagonal[k + 1] == 0);
        }
        if (r == c) {
            long long prod = 1;
            for (long long d : sf.diagonal) prod *= d;
            CHECK(prod == std::llabs(det(a)));
        }
    }
}

TEST_CASE("solve examples") {
    SUBCASE("identity") {
        const auto e = solve_mod2pi(phases({{1, 0}, {0, 1}}, {1.0, 2.0}));
        CHECK(e.alphas[0] == doctest::Approx(1.0));
        CHECK(e.alphas[1] == doctest::Approx(2.0));
        CHECK(!e.ambiguous());
    }
    SUBCASE("upper triangular with quadrature betas") {
        const Scene scene({Disk{{-3, 0}, 1.0, kPi / 2}, Disk{{3, 0}, 1.0, kPi / 3}}, wide());
        const auto betas = quadrature_betas(scene, {Loop::circle({0, 0}, 6.0), Loop::circle({3, 0}, 2.0)});
        CHECK(betas[0] == doctest::Approx(5 * kPi / 6).epsilon(1e-10));
        const auto e = solve_mod2pi(phases({{1, 1}, {0, 1}}, betas));
        CHECK(mod_distance(e.alphas[0], kPi / 2) < 1e-6);
        CHECK(mod_distance(e.alphas[1], kPi / 3) < 1e-6);
    }
    SUBCASE("determinant two") {
        try {
            solve_mod2pi(phases({{2, 0}, {0, 1}}, {1.0, 0.5}));
            FAIL("expected ambiguity");
        } catch (const AmbiguityError& e) {
            CHECK(e.coset_size() == 2);
            REQUIRE(e.solutions().size() == 2);
            CHECK(mod_distance(std::abs(e.solutions()[0][0] - e.solutions()[1][0]), kPi) < 1e-12);
        }
    }
    SUBCASE("rank deficient") {
        CHECK_THROWS_AS(solve_mod2pi(phases({{1, 1}}, {0.0})), RankDeficientError);
        CHECK_THROWS_AS(solve_mod2pi(phases({{1, 1}, {2, 2}}, {0.0, 0.0})), RankDeficientError);
    }
    SUBCASE("inconsistent rows") {
        CHECK_THROWS_AS(solve_mod2pi(phases({{1, 0}, {0, 1}, {1, 1}}, {1.0, 1.0, 1.0})), ConsistencyError);
        auto noisy = phases({{1, 0}, {0, 1}, {1, 1}}, {1.0, 1.0, 2.0 + 1e-5});
        CHECK_THROWS_AS(solve_mod2pi(noisy), ConsistencyError);
        noisy.noise_bound = 1e-5;
        CHECK(solve_mod2pi(noisy).alphas[0] == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS(solve_mod2pi(phases({}, {})), DataError);
        CHECK_THROWS_AS(solve_mod2pi(phases({{1, 0}, {0}}, {1.0, 1.0})), DataError);
        CHECK_THROWS_AS(solve_mod2pi(phases({{1}}, {1.0, 2.0})), DataError);
        FluxSystem mixed = phases({{1}}, {});
        mixed.betas.push_back(Measurement::intensity(2.0));
        CHECK_THROWS_AS(solve_mod2pi(mixed), DataError);
    }
    SUBCASE("zero fluxes") {
        const auto e = solve_mod2pi(phases({{1, 1}, {0, 1}}, {0.0, 0.0}));
        CHECK((e.alphas == std::vector<double>{0.0, 0.0}));
    }
}

TEST_CASE("round trip on random unimodular systems") {
    testing::Gen g(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = static_cast<std::size_t>(g.integer(1, 4));
        const IntMatrix n = random_unimodular(g, m);
        REQUIRE(std::llabs(det(n)) == 1);
        std::vector<double> alpha(m);
        for (auto& a : alpha) a = g.uniform(0.0, kTwoPi);
        const auto e = solve_mod2pi(phases(n, mat_vec(n, alpha)));
        for (std::size_t j = 0; j < m; ++j) CHECK(mod_distance(e.alphas[j], alpha[j]) < 1e-6);
        for (double a : e.alphas) {
            CHECK(a >= 0.0);
            CHECK(a < kTwoPi);
        }
        // Shifting any beta by 2 pi leaves the residue classes unchanged.
        auto shifted = mat_vec(n, alpha);
        shifted[static_cast<std::size_t>(g.integer(0, static_cast<int>(m) - 1))] += kTwoPi * g.integer(-3, 3);
        const auto e2 = solve_mod2pi(phases(n, shifted));
        for (std::size_t j = 0; j < m; ++j) CHECK(mod_distance(e2.alphas[j], e.alphas[j]) < 1e-9);
    }
}

TEST_CASE("ambiguity matches brute force") {
    testing::Gen g(99);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = static_cast<std::size_t>(g.integer(1, 3));
        IntMatrix n = random_unimodular(g, m);
        const long long d = g.integer(2, 4);
        for (auto& v : n[0]) v *= d;  // |det| = d
        std::vector<double> alpha(m);
        for (auto& a : alpha) a = g.uniform(0.0, kTwoPi);
        const auto beta = mat_vec(n, alpha);
        // Brute force: every alpha + 2 pi k / d on a fine coset grid that satisfies N alpha = beta.
        std::vector<std::vector<double>> brute;
        const int steps = static_cast<int>(d);
        std::vector<int> idx(m, 0);
        while (true) {
            std::vector<double> cand(m);
            for (std::size_t j = 0; j < m; ++j) cand[j] = std::fmod(alpha[j] + kTwoPi * idx[j] / steps, kTwoPi);
            const auto b = mat_vec(n, cand);
            bool ok = true;
            for (std::size_t i = 0; i < m; ++i) ok = ok && mod_distance(b[i], beta[i]) < 1e-9;
            if (ok) brute.push_back(cand);
            std::size_t p = 0;
            while (p < m && ++idx[p] == steps) idx[p++] = 0;
            if (p == m) break;
        }
        try {
            solve_mod2pi(phases(n, beta));
            FAIL("expected ambiguity");
        } catch (const AmbiguityError& e) {
            CHECK(e.coset_size() == d);
            CHECK(e.solutions().size() == static_cast<std::size_t>(d));
            CHECK(brute.size() == static_cast<std::size_t>(d));
            for (const auto& s : e.solutions()) {
                bool found = false;
                for (const auto& b : brute) {
                    bool same = true;
                    for (std::size_t j = 0; j < m; ++j) same = same && mod_distance(s[j], b[j]) < 1e-8;
                    found = found || same;
                }
                CHECK(found);
            }
        }
    }
}

TEST_CASE("intensity measurements intersect") {
    // Overdetermined intensity-only data pins the fluxes up to a global sign.
    const std::vector<double> alpha{0.9, 2.2};
    const IntMatrix n{{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    FluxSystem s;
    s.winding = n;
    for (double b : mat_vec(n, alpha)) s.betas.push_back(Measurement::intensity(interference_intensity(b)));
    const auto e = solve_measurements(s);
    REQUIRE(e.solutions.size() == 2);
    for (const auto& sol : e.solutions) {
        const bool plus = mod_distance(sol[0], alpha[0]) < 1e-6 && mod_distance(sol[1], alpha[1]) < 1e-6;
        const bool minus = mod_distance(sol[0], -alpha[0]) < 1e-6 && mod_distance(sol[1], -alpha[1]) < 1e-6;
        CHECK((plus || minus));
    }
    CHECK(e.ambiguity[0].size() == 2);

    // One exact phase row breaks the sign symmetry.
    s.betas[0] = Measurement::phase(alpha[0]);
    const auto e2 = solve_measurements(s);
    CHECK(!e2.ambiguous());
    CHECK(mod_distance(e2.alphas[1], alpha[1]) < 1e-6);

    s.betas[2] = Measurement::intensity(interference_intensity(alpha[0] + alpha[1] + 0.5));
    CHECK_THROWS_AS(solve_measurements(s), ConsistencyError);
}

TEST_CASE("system validation against loops") {
    const Scene scene({Disk{{-3, 0}, 1.0, 0.0}, Disk{{3, 0}, 1.0, 0.0}}, wide());
    const FluxSystem s = phases({{1, 1}, {0, 1}}, {0.0, 0.0});
    CHECK_NOTHROW(s.validate_against(scene, {Loop::circle({0, 0}, 6.0), Loop::circle({3, 0}, 2.0)}));
    CHECK_THROWS_AS(s.validate_against(scene, {Loop::circle({0, 0}, 6.0), Loop::circle({-3, 0}, 2.0)}), DataError);
}

TEST_CASE("design examples") {
    SUBCASE("well separated gives identity") {
        const Scene scene({Disk{{-10, 0}, 2, 0}, Disk{{10, 0}, 2, 0}, Disk{{0, 15}, 3, 0}}, wide());
        const auto d = design_measurements(scene);
        REQUIRE(d.winding.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            int ones = 0;
            for (long long v : d.winding[i]) ones += v != 0;
            CHECK(ones == 1);
        }
        CHECK(std::llabs(det(d.winding)) == 1);
        for (const auto& c : d.circuits) CHECK(!c.broken);
    }
    SUBCASE("nearly touching pair") {
        const Scene scene({Disk{{-2.05, 0}, 2, 0}, Disk{{2.05, 0}, 2, 0}}, wide());
        const auto d = design_measurements(scene);
        REQUIRE(d.winding.size() == 2);
        CHECK(std::llabs(det(d.winding)) == 1);
        bool both = false, broken_single = false;
        for (const auto& c : d.circuits) {
            both = both || (c.winding == std::vector<int>{1, 1});
            broken_single = broken_single || (c.broken && std::abs(c.winding[0]) + std::abs(c.winding[1]) == 1);
            CHECK((winding_numbers(c.loop(), scene) == c.winding));
        }
        CHECK(both);
        CHECK(broken_single);
    }
    SUBCASE("single obstacle") {
        const Scene scene({Disk{{0, 0}, 3, 0}}, wide());
        const auto d = design_measurements(scene);
        CHECK((d.winding == IntMatrix{{1}}));
    }
    SUBCASE("deterministic per seed") {
        const Scene scene({Disk{{-2.05, 0}, 2, 0}, Disk{{2.05, 0}, 2, 0}}, wide());
        const auto a = design_measurements(scene);
        const auto b = design_measurements(scene);
        CHECK((a.winding == b.winding));
        CHECK(a.circuits[1].vertices.size() == b.circuits[1].vertices.size());
    }
}

TEST_CASE("end to end recovery") {
    SUBCASE("GO oracle") {
        const Scene scene({Disk{{-2.05, 0}, 2, kPi / 2}, Disk{{2.05, 0}, 2, kPi / 3}}, wide());
        const auto e = recover(scene, go_phase_oracle(scene));
        CHECK(mod_distance(e.alphas[0], kPi / 2) < 1e-6);
        CHECK(mod_distance(e.alphas[1], kPi / 3) < 1e-6);
    }
    SUBCASE("circuit phases equal quadrature around the circuit") {
        const Scene scene({Disk{{-2.05, 0}, 2, 0.4}, Disk{{2.05, 0}, 2, 2.9}}, wide());
        const auto design = design_measurements(scene);
        const auto oracle = go_phase_oracle(scene);
        const VectorPotential a = ab_potential(scene);
        for (const auto& c : design.circuits)
            CHECK(mod_distance(oracle(c).value, loop_flux(a, c.loop(), 1e-12)) < 1e-8);
    }
    SUBCASE("total flux 2 pi is missed by the enclosing circuit") {
        const Scene scene({Disk{{-2.05, 0}, 2, kPi}, Disk{{2.05, 0}, 2, kPi}}, wide());
        const auto design = design_measurements(scene);
        const auto oracle = go_phase_oracle(scene);
        std::size_t enclosing = design.circuits.size();
        for (std::size_t i = 0; i < design.circuits.size(); ++i)
            if (design.circuits[i].winding == std::vector<int>{1, 1}) enclosing = i;
        REQUIRE(enclosing < design.circuits.size());
        const double beta = oracle(design.circuits[enclosing]).value;
        CHECK(mod_distance(beta, 0.0) < 1e-8);
        CHECK(interference_intensity(beta) < 1e-12);
        CHECK_THROWS_AS(solve_mod2pi(phases({{1, 1}}, {beta})), RankDeficientError);
        const auto e = recover(scene, oracle);
        CHECK(mod_distance(e.alphas[0], kPi) < 1e-6);
        CHECK(mod_distance(e.alphas[1], kPi) < 1e-6);
    }
    SUBCASE("zero fluxes") {
        const Scene scene({Disk{{-10, 0}, 2, 0}, Disk{{10, 0}, 2, 0}}, wide());
        const auto e = recover(scene, go_phase_oracle(scene));
        CHECK(mod_distance(e.alphas[0], 0.0) < 1e-9);
        CHECK(mod_distance(e.alphas[1], 0.0) < 1e-9);
    }
}
