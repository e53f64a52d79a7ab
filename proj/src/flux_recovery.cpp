#include "ablab/flux_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ablab/errors.hpp"
#include "ablab/gauge_field.hpp"

namespace ablab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_positive(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r -= kTwoPi;
    return r;
}

double phase_residual(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

IntMatrix identity(std::size_t n) {
    IntMatrix m(n, std::vector<long long>(n, 0));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1;
    return m;
}

// Fraction-free (Bareiss) determinant of a square integer matrix.
long long determinant(IntMatrix a) {
    const std::size_t n = a.size();
    long long sign = 1;
    long long prev = 1;
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k][k] == 0) {
            std::size_t p = k + 1;
            while (p < n && a[p][k] == 0) ++p;
            if (p == n) return 0;
            std::swap(a[p], a[k]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
        }
        prev = a[k][k];
    }
    return sign * a[n - 1][n - 1];
}

struct Candidate {
    std::vector<double> alphas;
    double residual{0.0};
};

}  // namespace

void FluxSystem::validate() const {
    if (winding.empty() || winding.front().empty()) throw DataError("winding matrix is empty");
    for (const auto& row : winding)
        if (row.size() != winding.front().size()) throw DataError("winding matrix rows differ in length");
    if (betas.size() != winding.size()) throw DataError("one measurement per winding row is required");
    if (!(noise_bound >= 0.0)) throw DataError("noise bound must be nonnegative");
    for (const auto& b : betas)
        if (!std::isfinite(b.value)) throw DataError("measurement is not finite");
}

void FluxSystem::validate_against(const Scene& scene, const std::vector<Loop>& loops) const {
    validate();
    if (loops.size() != rows()) throw DataError("one loop per winding row is required");
    if (columns() != scene.size()) throw DataError("winding matrix does not match the obstacle count");
    for (std::size_t k = 0; k < loops.size(); ++k) {
        const std::vector<int> w = winding_numbers(loops[k], scene);
        for (std::size_t j = 0; j < w.size(); ++j)
            if (w[j] != winding[k][j])
                throw DataError("winding row " + std::to_string(k) + " disagrees with its circuit");
    }
}

SmithForm smith_normal_form(const IntMatrix& a) {
    const std::size_t r = a.size();
    const std::size_t c = r ? a.front().size() : 0;
    IntMatrix d = a;
    SmithForm out;
    out.u = identity(r);
    out.v = identity(c);
    auto row_op = [&](std::size_t dst, std::size_t src, long long q) {  // row dst -= q row src
        for (std::size_t j = 0; j < c; ++j) d[dst][j] -= q * d[src][j];
        for (std::size_t j = 0; j < r; ++j) out.u[dst][j] -= q * out.u[src][j];
    };
    auto col_op = [&](std::size_t dst, std::size_t src, long long q) {  // col dst -= q col src
        for (std::size_t i = 0; i < r; ++i) d[i][dst] -= q * d[i][src];
        for (std::size_t i = 0; i < c; ++i) out.v[i][dst] -= q * out.v[i][src];
    };
    auto swap_rows = [&](std::size_t i, std::size_t k) {
        std::swap(d[i], d[k]);
        std::swap(out.u[i], out.u[k]);
    };
    auto swap_cols = [&](std::size_t j, std::size_t k) {
        for (auto& row : d) std::swap(row[j], row[k]);
        for (auto& row : out.v) std::swap(row[j], row[k]);
    };

    const std::size_t n = std::min(r, c);
    for (std::size_t t = 0; t < n; ++t) {
        while (true) {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            long long best = 0;
            std::size_t bi = t, bj = t;
            for (std::size_t i = t; i < r; ++i)
                for (std::size_t j = t; j < c; ++j)
                    if (d[i][j] != 0 && (best == 0 || std::llabs(d[i][j]) < best)) {
                        best = std::llabs(d[i][j]);
                        bi = i;
                        bj = j;
                    }
            if (best == 0) break;
            swap_rows(t, bi);
            swap_cols(t, bj);
            bool clean = true;
            for (std::size_t i = t + 1; i < r; ++i) {
                if (d[i][t] != 0) row_op(i, t, d[i][t] / d[t][t]);
                if (d[i][t] != 0) clean = false;
            }
            for (std::size_t j = t + 1; j < c; ++j) {
                if (d[t][j] != 0) col_op(j, t, d[t][j] / d[t][t]);
                if (d[t][j] != 0) clean = false;
            }
            if (!clean) continue;
            bool divides = true;
            for (std::size_t i = t + 1; i < r && divides; ++i) {
                for (std::size_t j = t + 1; j < c; ++j) {
                    if (d[i][j] % d[t][t] != 0) {
                        row_op(t, i, -1);  // row t += row i
                        divides = false;
                        break;
                    }
                }
            }
            if (divides) break;
        }
        if (d[t][t] < 0) {
            for (std::size_t j = 0; j < c; ++j) d[t][j] = -d[t][j];
            for (std::size_t j = 0; j < r; ++j) out.u[t][j] = -out.u[t][j];
        }
    }
    out.diagonal.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.diagonal[t] = d[t][t];
    return out;
}

std::vector<double> invert_intensity(double intensity) {
    if (!std::isfinite(intensity) || intensity < -1e-9 || intensity > 4.0 + 1e-9)
        throw DataError("intensity " + std::to_string(intensity) + " lies outside [0, 4]");
    const double i = std::clamp(intensity, 0.0, 4.0);
    if (i == 0.0) return {0.0};
    if (i == 4.0) return {std::numbers::pi};
    const double a = 2.0 * std::asin(std::sqrt(i) / 2.0);
    return {a, kTwoPi - a};
}

namespace {

// Solves the phase-only system; returns every admissible solution of the coset.
std::vector<Candidate> solve_phases(const IntMatrix& n, const std::vector<double>& beta, const SmithForm& sf,
                                    const std::vector<Measurement>& kinds, double phase_tol,
                                    double intensity_tol, std::size_t enumerate_cap) {
    const std::size_t r = n.size();
    const std::size_t m = n.front().size();
    std::vector<double> ub(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < r; ++k) ub[i] += static_cast<double>(sf.u[i][k]) * beta[k];

    std::size_t coset = 1;
    for (std::size_t i = 0; i < m; ++i) coset *= static_cast<std::size_t>(sf.diagonal[i]);
    std::vector<Candidate> out;
    if (coset > enumerate_cap) return out;
    std::vector<long long> t(m, 0);
    for (std::size_t idx = 0; idx < coset; ++idx) {
        std::size_t rem = idx;
        for (std::size_t i = 0; i < m; ++i) {
            t[i] = static_cast<long long>(rem % static_cast<std::size_t>(sf.diagonal[i]));
            rem /= static_cast<std::size_t>(sf.diagonal[i]);
        }
        std::vector<double> y(m);
        for (std::size_t i = 0; i < m; ++i)
            y[i] = (ub[i] + kTwoPi * static_cast<double>(t[i])) / static_cast<double>(sf.diagonal[i]);
        Candidate cand;
        cand.alphas.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += static_cast<double>(sf.v[i][k]) * y[k];
            cand.alphas[i] = wrap_positive(acc);
        }
        bool ok = true;
        for (std::size_t row = 0; row < r; ++row) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += static_cast<double>(n[row][j]) * cand.alphas[j];
            double res;
            if (kinds[row].kind == Measurement::Kind::Intensity) {
                res = std::abs(interference_intensity(s) - kinds[row].value);
                ok = ok && res <= intensity_tol;
            } else {
                res = phase_residual(s, kinds[row].value);
                ok = ok && res <= phase_tol;
            }
            cand.residual = std::max(cand.residual, res);
        }
        if (ok) out.push_back(std::move(cand));
    }
    return out;
}

FluxEstimate assemble(std::vector<Candidate> cands, std::size_t m) {
    // Merge duplicates (mod 2 pi).
    std::vector<Candidate> unique;
    for (auto& c : cands) {
        bool dup = false;
        for (auto& u : unique) {
            bool same = true;
            for (std::size_t j = 0; j < m; ++j) same = same && phase_residual(c.alphas[j], u.alphas[j]) < 1e-6;
            if (same) {
                u.residual = std::min(u.residual, c.residual);
                dup = true;
                break;
            }
        }
        if (!dup) unique.push_back(std::move(c));
    }
    std::sort(unique.begin(), unique.end(), [](const Candidate& a, const Candidate& b) { return a.alphas < b.alphas; });
    FluxEstimate est;
    est.alphas = unique.front().alphas;
    est.ambiguity.assign(m, {});
    for (const auto& u : unique) {
        est.solutions.push_back(u.alphas);
        est.max_residual = std::max(est.max_residual, u.residual);
        for (std::size_t j = 0; j < m; ++j) {
            auto& set = est.ambiguity[j];
            if (std::none_of(set.begin(), set.end(), [&](double v) { return phase_residual(v, u.alphas[j]) < 1e-6; }))
                set.push_back(u.alphas[j]);
        }
    }
    for (auto& set : est.ambiguity) std::sort(set.begin(), set.end());
    return est;
}

FluxEstimate solve_impl(const FluxSystem& system, double tolerance, bool allow_intensity) {
    system.validate();
    if (!(tolerance > 0.0)) throw DataError("tolerance must be positive");
    const std::size_t r = system.rows();
    const std::size_t m = system.columns();
    bool has_intensity = false;
    for (const auto& b : system.betas) {
        if (b.kind == Measurement::Kind::Intensity) {
            if (!allow_intensity) throw DataError("solve_mod2pi takes phase measurements only");
            has_intensity = true;
        }
    }
    const SmithForm sf = smith_normal_form(system.winding);
    std::size_t rank = 0;
    for (long long d : sf.diagonal) rank += d != 0 ? 1 : 0;
    if (r < m || rank < m)
        throw RankDeficientError("winding matrix has rank " + std::to_string(rank) + " for " + std::to_string(m) +
                                 " obstacles; some flux combination is unobservable");
    long long coset = 1;
    for (std::size_t i = 0; i < m; ++i) coset *= sf.diagonal[i];

    // Residual allowance: noise propagates through the integer inverse.
    long long inv_l1 = 1;
    for (std::size_t i = 0; i < m; ++i) {
        long long row = 0;
        for (std::size_t k = 0; k < m; ++k) {
            long long acc = 0;
            for (std::size_t q = 0; q < m; ++q) acc += sf.v[i][q] * sf.u[q][k];
            row += std::llabs(acc);
        }
        inv_l1 = std::max(inv_l1, row);
    }
    long long n_l1 = 0;
    for (const auto& row : system.winding) {
        long long s = 0;
        for (long long v : row) s += std::llabs(v);
        n_l1 = std::max(n_l1, s);
    }
    const double noise = system.noise_bound * (1.0 + static_cast<double>(n_l1 * inv_l1));
    const double intensity_tol = tolerance + 2.0 * noise;
    const double phase_tol = tolerance + noise + (has_intensity ? 2.0 * std::sqrt(intensity_tol) * static_cast<double>(n_l1 * inv_l1) : 0.0);

    // Expand intensity rows into their sign choices.
    std::vector<std::vector<double>> options(r);
    for (std::size_t i = 0; i < r; ++i) {
        const auto& b = system.betas[i];
        options[i] = b.kind == Measurement::Kind::Intensity ? invert_intensity(b.value) : std::vector<double>{b.value};
    }
    std::size_t combos = 1;
    for (const auto& o : options) {
        combos *= o.size();
        if (combos > (1u << 16)) throw DataError("too many intensity rows to expand");
    }
    constexpr std::size_t enumerate_cap = 4096;
    std::vector<Candidate> all;
    double best_residual = std::numeric_limits<double>::infinity();
    std::vector<double> beta(r);
    for (std::size_t idx = 0; idx < combos; ++idx) {
        std::size_t rem = idx;
        for (std::size_t i = 0; i < r; ++i) {
            beta[i] = options[i][rem % options[i].size()];
            rem /= options[i].size();
        }
        auto cands = solve_phases(system.winding, beta, sf, system.betas, phase_tol, intensity_tol, enumerate_cap);
        if (cands.empty() && coset <= static_cast<long long>(enumerate_cap)) {
            // Record how far off the closest candidate was for the error report.
            auto loose = solve_phases(system.winding, beta, sf, system.betas, HUGE_VAL, HUGE_VAL, enumerate_cap);
            for (const auto& c : loose) best_residual = std::min(best_residual, c.residual);
        }
        for (auto& c : cands) all.push_back(std::move(c));
    }
    if (coset > 1) {
        std::vector<std::vector<double>> sols;
        for (const auto& c : all) sols.push_back(c.alphas);
        throw AmbiguityError("winding matrix has |det| = " + std::to_string(coset) +
                                 "; fluxes are determined only up to a coset of that size",
                             static_cast<std::size_t>(coset), sols);
    }
    if (all.empty())
        throw ConsistencyError("no flux vector reproduces every measurement (best residual " +
                                   std::to_string(best_residual) + ")",
                               best_residual);
    return assemble(std::move(all), m);
}

}  // namespace

FluxEstimate solve_mod2pi(const FluxSystem& system, double tolerance) {
    return solve_impl(system, tolerance, false);
}

FluxEstimate solve_measurements(const FluxSystem& system, double tolerance) {
    return solve_impl(system, tolerance, true);
}

// ---------------------------------------------------------------------------
// Circuit design

namespace {

struct DesignContext {
    const Scene& scene;
    Scene zero_scene;
    VectorPotential zero_potential;
    double clearance;
    double extent;
};

double segment_clearance(const Scene& scene, const Vec2& a, const Vec2& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const Disk& d : scene.obstacles()) best = std::min(best, segment_distance(d.center, a, b) - d.radius);
    return best;
}

bool inside_bound(const Box& box, const Vec2& p, double margin) {
    return p.x > box.min.x + margin && p.x < box.max.x - margin && p.y > box.min.y + margin &&
           p.y < box.max.y - margin;
}

// Builds and validates a circuit; beam 1 legs are only required to miss obstacles when
// `exempt_beam1` is set.
std::optional<Circuit> make_circuit(const DesignContext& ctx, const BeamSpec& b1, const BeamSpec& b2,
                                    const Vec2& meet, bool exempt_beam1) {
    const Box& box = ctx.scene.bound();
    const double margin = 1e-6 * ctx.extent;
    if (!inside_bound(box, b1.anchor, margin) || !inside_bound(box, b2.anchor, margin) ||
        !inside_bound(box, meet, margin))
        return std::nullopt;
    if (ctx.scene.clearance(b1.anchor) < ctx.clearance || ctx.scene.clearance(b2.anchor) < ctx.clearance)
        return std::nullopt;
    if (segment_clearance(ctx.scene, b2.anchor, meet) < ctx.clearance) return std::nullopt;
    if (segment_clearance(ctx.scene, b2.anchor, b1.anchor) < ctx.clearance) return std::nullopt;
    if (!exempt_beam1 && b1.max_reflections == 0 && segment_clearance(ctx.scene, b1.anchor, meet) < ctx.clearance)
        return std::nullopt;
    try {
        const GOPrediction p = predict_two_beam(ctx.zero_scene, ctx.zero_potential, b1, b2, 1e-8);
        if (norm(p.meeting_point - meet) > 1e-7 * ctx.extent) return std::nullopt;
        if (!exempt_beam1) {
            for (const Leg& leg : p.beam_1_path.legs)
                if (segment_clearance(ctx.scene, leg.start, leg.end()) < ctx.clearance) return std::nullopt;
        }
        Circuit c;
        c.beam1 = b1;
        c.beam2 = b2;
        c.vertices.push_back(b1.anchor);
        for (const Vec2& q : p.beam_1_path.reflection_points) c.vertices.push_back(q);
        c.vertices.push_back(p.meeting_point);
        c.vertices.push_back(b2.anchor);
        c.winding = p.winding;
        c.broken = !p.beam_1_path.reflection_points.empty();
        return c;
    } catch (const Error&) {
        return std::nullopt;
    }
}

// Isosceles triangle around a disk-like region: apex above along u, base below.
std::optional<Circuit> triangle_circuit(const DesignContext& ctx, const Vec2& center, double radius) {
    const double reach = radius + 1.01 * ctx.clearance;
    for (double scale : {1.0, 1.25, 1.6, 2.0, 3.0}) {
        for (double half_deg : {25.0, 35.0, 15.0, 45.0}) {
            const double half = half_deg * std::numbers::pi / 180.0;
            for (int o = 0; o < 72; ++o) {
                const double theta = std::numbers::pi / 2.0 + o * kTwoPi / 72.0;
                const Vec2 u = from_angle(theta);
                const Vec2 left = perp(u);
                const double h = reach * scale / std::sin(half);
                const double b = reach * scale;
                const double w = (h + b) * std::tan(half);
                const Vec2 meet = center + u * h;
                const Vec2 base = center - u * b;
                BeamSpec b1, b2;
                b1.anchor = base - left * w;
                b2.anchor = base + left * w;
                b1.direction = normalized(meet - b1.anchor);
                b2.direction = normalized(meet - b2.anchor);
                if (auto c = make_circuit(ctx, b1, b2, meet, false)) return c;
            }
        }
    }
    return std::nullopt;
}

// Groups obstacles whose gaps are too narrow for a beam with clearance.
std::vector<std::vector<std::size_t>> close_clusters(const Scene& scene, double clearance) {
    const std::size_t m = scene.size();
    std::vector<std::size_t> parent(m);
    for (std::size_t i = 0; i < m; ++i) parent[i] = i;
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    const auto& obs = scene.obstacles();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (norm(obs[i].center - obs[j].center) - obs[i].radius - obs[j].radius < 2.0 * clearance)
                parent[find(i)] = find(j);
    std::vector<std::vector<std::size_t>> groups;
    std::vector<int> slot(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return groups;
}

// Beam 1 aimed through the narrow gap between two obstacles (bouncing inside the wedge
// if it must), meeting a straight beam 2 on the far side.
std::optional<Circuit> gap_circuit(const DesignContext& ctx, std::size_t j, std::size_t k, std::mt19937_64& rng,
                                   bool want_reflection) {
    const Disk& a = ctx.scene.obstacles()[j];
    const Disk& b = ctx.scene.obstacles()[k];
    const Vec2 axis = normalized(b.center - a.center);
    const Vec2 side = perp(axis);
    const double gap = norm(b.center - a.center) - a.radius - b.radius;
    const Vec2 pinch = a.center + axis * (a.radius + 0.5 * gap);
    const double r = std::min(a.radius, b.radius);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double sgn = uni(rng) < 0.5 ? -1.0 : 1.0;
    const Vec2 a1 = pinch + side * (sgn * r * (1.5 + 4.0 * uni(rng))) + axis * (r * (uni(rng) - 0.5));
    const Vec2 aim = pinch + axis * (gap * (uni(rng) - 0.5) * 0.9);
    const Vec2 dir = normalized(aim - a1);
    BrokenRay full;
    try {
        full = trace_broken_ray(a1, dir, ctx.scene, 12);
    } catch (const Error&) {
        return std::nullopt;
    }
    // First leg that crosses the pinch segment.
    const Vec2 p0 = a.center + axis * a.radius;
    const Vec2 p1 = b.center - axis * b.radius;
    for (std::size_t leg = 0; leg < full.legs.size(); ++leg) {
        const Leg& L = full.legs[leg];
        const Vec2 e = p1 - p0;
        const double den = cross(L.direction, e);
        if (std::abs(den) < 1e-14) continue;
        const Vec2 w = p0 - L.start;
        const double s = cross(w, e) / den;
        const double t = cross(w, L.direction) / den;
        if (s <= 0.0 || s >= L.length || t < 0.0 || t > 1.0) continue;
        if (want_reflection && leg == 0) return std::nullopt;
        const double room = L.length - s;
        if (room < 0.2 * r) return std::nullopt;
        const double along = s + room * (0.1 + 0.8 * uni(rng)) * std::min(1.0, 4.0 * r / room);
        const Vec2 meet = L.start + L.direction * along;
        const double turn = (25.0 + 85.0 * uni(rng)) * std::numbers::pi / 180.0 * (uni(rng) < 0.5 ? -1 : 1);
        const Vec2 e2 = from_angle(std::atan2(L.direction.y, L.direction.x) + turn);
        BeamSpec b1, b2;
        b1.anchor = a1;
        b1.direction = dir;
        b1.max_reflections = static_cast<int>(full.reflection_points.size());
        b2.direction = e2;
        b2.anchor = meet - e2 * (r * (2.0 + 6.0 * uni(rng)));
        return make_circuit(ctx, b1, b2, meet, true);
    }
    return std::nullopt;
}

// Picks m rows with |det| = 1, preferring earlier candidates.
bool pick_unimodular(const std::vector<Circuit>& cands, std::size_t m, std::size_t start,
                     std::vector<std::size_t>& chosen) {
    if (chosen.size() == m) {
        IntMatrix n;
        for (std::size_t i : chosen) n.emplace_back(cands[i].winding.begin(), cands[i].winding.end());
        return std::llabs(determinant(n)) == 1;
    }
    for (std::size_t i = start; i < cands.size(); ++i) {
        chosen.push_back(i);
        if (pick_unimodular(cands, m, i + 1, chosen)) return true;
        chosen.pop_back();
    }
    return false;
}

}  // namespace

MeasurementDesign design_measurements(const Scene& scene, const DesignOptions& options) {
    const std::size_t m = scene.size();
    if (m == 0) throw DesignFailureError("scene has no obstacles");
    if (!(options.clearance_fraction >= 0.0)) throw ConfigError("clearance fraction must be nonnegative");
    double rmin = std::numeric_limits<double>::infinity();
    for (const Disk& d : scene.obstacles()) rmin = std::min(rmin, d.radius);
    const Box& box = scene.bound();
    DesignContext ctx{scene, scene.with_fluxes(std::vector<double>(m, 0.0)), {}, options.clearance_fraction * rmin,
                      std::max(box.max.x - box.min.x, box.max.y - box.min.y)};
    ctx.zero_potential = ab_potential(ctx.zero_scene);

    std::vector<Circuit> cands;
    auto add = [&](Circuit c) {
        if (std::all_of(c.winding.begin(), c.winding.end(), [](int v) { return v == 0; })) return;
        for (const auto& e : cands)
            if (e.winding == c.winding) return;
        cands.push_back(std::move(c));
    };

    // Isolating straight-beam triangles.
    for (std::size_t j = 0; j < m; ++j) {
        const Disk& d = scene.obstacles()[j];
        if (auto c = triangle_circuit(ctx, d.center, d.radius)) add(std::move(*c));
    }
    std::vector<std::size_t> chosen;
    if (cands.size() >= m && pick_unimodular(cands, m, 0, chosen)) {
        MeasurementDesign out;
        for (std::size_t i : chosen) {
            out.circuits.push_back(cands[i]);
            out.winding.emplace_back(cands[i].winding.begin(), cands[i].winding.end());
        }
        return out;
    }

    // Clusters of nearly touching obstacles: one circuit around each cluster, then
    // broken-ray circuits through the narrow gaps.
    const auto clusters = close_clusters(scene, ctx.clearance);
    for (const auto& group : clusters) {
        if (group.size() < 2) continue;
        Vec2 c{};
        for (std::size_t j : group) c = c + scene.obstacles()[j].center;
        c = c / static_cast<double>(group.size());
        double radius = 0.0;
        for (std::size_t j : group) radius = std::max(radius, norm(scene.obstacles()[j].center - c) + scene.obstacles()[j].radius);
        if (auto circ = triangle_circuit(ctx, c, radius)) add(std::move(*circ));
    }
    std::mt19937_64 rng(options.seed);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& group : clusters)
        for (std::size_t a = 0; a < group.size(); ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b) {
                const Disk& p = scene.obstacles()[group[a]];
                const Disk& q = scene.obstacles()[group[b]];
                if (norm(p.center - q.center) - p.radius - q.radius < 2.0 * ctx.clearance)
                    pairs.emplace_back(group[a], group[b]);
            }
    if (!pairs.empty()) {
        for (int attempt = 0; attempt < options.broken_candidates; ++attempt) {
            const auto& pr = pairs[static_cast<std::size_t>(attempt) % pairs.size()];
            // Reflected beams first; plain threading through the gap as a later resort.
            const bool want_reflection = attempt < options.broken_candidates / 2;
            if (auto c = gap_circuit(ctx, pr.first, pr.second, rng, want_reflection)) {
                add(std::move(*c));
                chosen.clear();
                if (cands.size() >= m && pick_unimodular(cands, m, 0, chosen)) break;
            }
        }
    }
    chosen.clear();
    if (cands.size() < m || !pick_unimodular(cands, m, 0, chosen))
        throw DesignFailureError("could not find circuits with a unimodular winding matrix; supply circuits manually");
    MeasurementDesign out;
    for (std::size_t i : chosen) {
        out.circuits.push_back(cands[i]);
        out.winding.emplace_back(cands[i].winding.begin(), cands[i].winding.end());
    }
    return out;
}

MeasurementOracle go_phase_oracle(const Scene& scene, double rel_tol) {
    const VectorPotential potential = ab_potential(scene);
    return [scene, potential, rel_tol](const Circuit& c) {
        return Measurement::phase(predict_two_beam(scene, potential, c.beam1, c.beam2, rel_tol).alpha);
    };
}

MeasurementOracle go_intensity_oracle(const Scene& scene, double rel_tol) {
    const VectorPotential potential = ab_potential(scene);
    return [scene, potential, rel_tol](const Circuit& c) {
        return Measurement::intensity(predict_two_beam(scene, potential, c.beam1, c.beam2, rel_tol).intensity);
    };
}

FluxEstimate recover(const Scene& scene, const MeasurementOracle& oracle, const DesignOptions& options,
                     double tolerance) {
    const MeasurementDesign design = design_measurements(scene, options);
    FluxSystem sys;
    sys.winding = design.winding;
    for (const Circuit& c : design.circuits) sys.betas.push_back(oracle(c));
    return solve_measurements(sys, tolerance);
}

}  // namespace ablab
