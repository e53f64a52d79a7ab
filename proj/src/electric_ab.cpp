#include "ablab/electric_ab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ablab/errors.hpp"
#include "ablab/quadrature.hpp"

namespace ablab {

namespace {

double clamp_integral(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return integrate(f, a, b, 1e-14, 1e-13).value;
}

std::function<double(double)> table_function(std::vector<std::pair<double, double>> table) {
    if (table.empty()) throw ConfigError("potential table is empty");
    std::sort(table.begin(), table.end());
    for (std::size_t k = 1; k < table.size(); ++k)
        if (table[k].first == table[k - 1].first) throw ConfigError("potential table repeats a time");
    return [table = std::move(table)](double t) {
        if (t <= table.front().first) return table.front().second;
        if (t >= table.back().first) return table.back().second;
        const auto it = std::upper_bound(table.begin(), table.end(), std::make_pair(t, -HUGE_VAL));
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double w = (t - lo.first) / (hi.first - lo.first);
        return lo.second + w * (hi.second - lo.second);
    };
}

void zero_outside(std::vector<Complex>& values, const std::vector<std::uint8_t>& mask, double& removed) {
    removed = 0.0;
    for (std::size_t s = 0; s < values.size(); ++s) {
        if (!mask[s] && values[s] != Complex{}) {
            removed += std::norm(values[s]);
            values[s] = Complex{};
        }
    }
}

double probability(const std::vector<Complex>& v) {
    double acc = 0.0;
    for (const Complex& c : v) acc += std::norm(c);
    return acc;
}

}  // namespace

void SlabGeometry::validate() const {
    if (!(disk_radius > 0.0)) throw ConfigError("disk radius must be positive");
    if (!(slab_half_width > 0.0) || slab_half_width >= disk_radius)
        throw ConfigError("slab half-width must lie in (0, disk radius)");
    if (!(tau_max > 0.0)) throw ConfigError("tau_max must be positive");
}

bool SlabGeometry::contains(const Vec2& p, double tau) const {
    const Vec2 r = p - center;
    if (dot(r, r) >= disk_radius * disk_radius) return false;
    if (std::abs(r.x) <= slab_half_width && std::abs(r.y) >= tau) return false;
    return true;
}

void DomainSchedule::validate() const {
    geometry.validate();
    for (double d : {grow_duration, hold_duration, retract_duration, post_merge_duration})
        if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("schedule durations must be positive");
}

double DomainSchedule::tau(double t) const {
    const double tm = geometry.tau_max;
    if (t <= 0.0) return tm;
    if (t < grow_duration) return tm * (1.0 - t / grow_duration);
    if (t <= split_end()) return 0.0;
    const double r = t - split_end();
    if (r < retract_duration) return tm * r / retract_duration;
    return tm;
}

std::vector<std::uint8_t> DomainSchedule::mask(const LatticeSpec& spec, double t) const {
    const double tau_t = tau(t);
    std::vector<std::uint8_t> m(spec.size(), 0);
    for (int j = 1; j < spec.ny - 1; ++j)
        for (int i = 1; i < spec.nx - 1; ++i)
            m[spec.index(i, j)] = geometry.contains(spec.site(i, j), tau_t) ? 1 : 0;
    return m;
}

SplitPotential SplitPotential::constant(double v1, double v2, double start, double end) {
    if (end < start) throw ConfigError("potential window ends before it starts");
    return {[v1](double) { return v1; }, [v2](double) { return v2; }, start, end};
}

SplitPotential SplitPotential::tabulated(std::vector<std::pair<double, double>> v1,
                                         std::vector<std::pair<double, double>> v2, double start,
                                         double end) {
    if (end < start) throw ConfigError("potential window ends before it starts");
    return {table_function(std::move(v1)), table_function(std::move(v2)), start, end};
}

double SplitPotential::value_1(double t) const {
    return (t >= window_start && t <= window_end && window_end > window_start) ? v1(t) : 0.0;
}

double SplitPotential::value_2(double t) const {
    return (t >= window_start && t <= window_end && window_end > window_start) ? v2(t) : 0.0;
}

std::pair<double, double> component_phases(const SplitPotential& split, const PhysicalConstants& constants,
                                           double t0, double t1) {
    constants.validate();
    const double a = std::max(t0, split.window_start);
    const double b = std::min(t1, split.window_end);
    const double f = constants.charge / constants.hbar;
    return {f * clamp_integral(split.v1, a, b), f * clamp_integral(split.v2, a, b)};
}

double electric_flux(const SplitPotential& split, const PhysicalConstants& constants) {
    const auto [a1, a2] = component_phases(split, constants, split.window_start, split.window_end);
    return a1 - a2;
}

ComponentLabels label_components(const std::vector<std::uint8_t>& mask, int nx, int ny) {
    ComponentLabels out;
    out.labels.assign(mask.size(), -1);
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < mask.size(); ++seed) {
        if (!mask[seed] || out.labels[seed] >= 0) continue;
        const int id = out.count++;
        out.labels[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t s = stack.back();
            stack.pop_back();
            const int i = static_cast<int>(s % static_cast<std::size_t>(nx));
            const int j = static_cast<int>(s / static_cast<std::size_t>(nx));
            const std::size_t nb[4] = {i > 0 ? s - 1 : s, i + 1 < nx ? s + 1 : s,
                                       j > 0 ? s - static_cast<std::size_t>(nx) : s,
                                       j + 1 < ny ? s + static_cast<std::size_t>(nx) : s};
            for (std::size_t t : nb) {
                if (mask[t] && out.labels[t] < 0) {
                    out.labels[t] = id;
                    stack.push_back(t);
                }
            }
        }
    }
    return out;
}

std::vector<int> split_labels(const LatticeSpec& spec, const std::vector<std::uint8_t>& mask,
                              const SlabGeometry& geometry) {
    const ComponentLabels comp = label_components(mask, spec.nx, spec.ny);
    if (comp.count != 2)
        throw LabelingError("expected two components, found " + std::to_string(comp.count));
    std::vector<double> sx(2, 0.0);
    std::vector<double> n(2, 0.0);
    for (std::size_t s = 0; s < mask.size(); ++s) {
        if (comp.labels[s] < 0) continue;
        sx[comp.labels[s]] += spec.site(s).x - geometry.center.x;
        n[comp.labels[s]] += 1.0;
    }
    const double c0 = sx[0] / n[0];
    const double c1 = sx[1] / n[1];
    if ((c0 > 0.0) == (c1 > 0.0)) throw LabelingError("components do not straddle the slab axis");
    const int plus = c0 > 0.0 ? 0 : 1;
    std::vector<int> out(mask.size(), 0);
    for (std::size_t s = 0; s < mask.size(); ++s)
        if (comp.labels[s] >= 0) out[s] = comp.labels[s] == plus ? 1 : -1;
    return out;
}

Field component_phase_evolution(const Field& field_at_split, const SplitPotential& split,
                                const std::vector<int>& labels, const PhysicalConstants& constants) {
    if (labels.size() != field_at_split.values.size())
        throw GridMismatchError("labels do not match the field");
    const auto [a1, a2] = component_phases(split, constants, split.window_start, split.window_end);
    const Complex p1 = std::polar(1.0, -a1);
    const Complex p2 = std::polar(1.0, -a2);
    Field out = field_at_split;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] > 0) {
            out.values[s] *= p1;
        } else if (labels[s] < 0) {
            out.values[s] *= p2;
        } else if (out.values[s] != Complex{}) {
            throw LabelingError("site " + std::to_string(s) + " carries amplitude but no component label");
        }
    }
    return out;
}

DensityHistory run_electric_ab(const DomainSchedule& schedule, const SplitPotential& split,
                               const Field& u0, const LatticeSpec& spec, ElectricMode mode) {
    schedule.validate();
    spec.validate();
    if (u0.nx != spec.nx || u0.ny != spec.ny || u0.values.size() != spec.size())
        throw GridMismatchError("initial field does not match the lattice");
    if (split.window_end > split.window_start &&
        (split.window_start < schedule.split_start() || split.window_end > schedule.split_end()))
        throw ConfigError("potential window must lie inside the static split phase");

    const std::size_t n = spec.size();
    const int steps = static_cast<int>(std::lround(schedule.total_duration() / spec.dt));
    if (steps < 1) throw ConfigError("time step exceeds the schedule length");

    std::vector<std::uint8_t> mask = schedule.mask(spec, 0.0);
    Field u = u0;
    u.time = 0.0;
    double outside = 0.0;
    zero_outside(u.values, mask, outside);
    const double total0 = probability(u0.values);
    if (!(total0 > 0.0)) throw DomainError("initial field is zero");
    if (outside > 1e-6 * total0) throw DomainError("initial field is not supported in the initial slice");

    const std::vector<double> zeros(n, 0.0);
    Lattice lattice(spec, mask, zeros, zeros, zeros);

    DensityHistory hist;
    hist.spec = spec;
    hist.split_start = schedule.split_start();
    hist.split_end = schedule.split_end();
    double lost = outside;
    auto record = [&](const Field& f) {
        hist.times.push_back(f.time);
        hist.densities.push_back(site_probabilities(f));
        hist.mask_loss.push_back(lost);
    };
    record(u);

    bool split_seen = false;
    bool phase_applied = false;
    const bool potential_on = split.window_end > split.window_start;
    const double half_dt = 0.5 * spec.dt;
    for (int k = 0; k < steps; ++k) {
        const double t0 = k * spec.dt;
        const double t1 = (k + 1) * spec.dt;

        // Re-mask for the end of this step.
        std::vector<std::uint8_t> next = schedule.mask(spec, t1);
        if (next != mask) {
            const double before = probability(u.values);
            double removed = 0.0;
            zero_outside(u.values, next, removed);
            if (removed > 0.2 * before)
                throw ScheduleTooFastError("re-masking at t = " + std::to_string(t1) + " removed " +
                                           std::to_string(100.0 * removed / before) + "% of the probability");
            lost += removed;
            mask = std::move(next);
            lattice = lattice.with_mask(mask);
        }

        const bool split_now = t1 > schedule.split_start() && t0 < schedule.split_end() &&
                               label_components(mask, spec.nx, spec.ny).count == 2;
        std::vector<int> labels;
        if (split_now) labels = split_labels(spec, mask, schedule.geometry);
        if (split_now && !split_seen) {
            split_seen = true;
            double pp = 0.0, pm = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                if (labels[s] > 0) pp += std::norm(u.values[s]);
                if (labels[s] < 0) pm += std::norm(u.values[s]);
            }
            hist.split_probabilities = {pp, pm};
            const double tot = pp + pm;
            if (pp < 0.1 * tot || pm < 0.1 * tot)
                throw ExperimentDesignError("less than 10% of the probability in one component at split time");
        }

        const bool window_hits = potential_on && t1 > split.window_start && t0 < split.window_end;
        if (window_hits && !split_now)
            throw LabelingError("potential window overlaps a step where the slice is not split");

        if (mode == ElectricMode::FullNumeric && window_hits) {
            // Strang splitting with exact half-step phase integrals; the phases commute with
            // the kinetic step while the components are disconnected.
            auto kick = [&](double a, double b) {
                const auto [p1, p2] = component_phases(split, spec.constants, a, b);
                const Complex f1 = std::polar(1.0, -p1);
                const Complex f2 = std::polar(1.0, -p2);
                for (std::size_t s = 0; s < n; ++s) {
                    if (labels[s] > 0) u.values[s] *= f1;
                    if (labels[s] < 0) u.values[s] *= f2;
                }
            };
            kick(t0, t0 + half_dt);
            u = step(lattice, u);
            kick(t0 + half_dt, t1);
        } else {
            if (mode == ElectricMode::AnalyticPhase && window_hits && !phase_applied) {
                u = component_phase_evolution(u, split, labels, spec.constants);
                phase_applied = true;
            }
            u = step(lattice, u);
        }
        u.time = t1;
        record(u);
    }
    if (potential_on && !split_seen) throw LabelingError("the slice never split");
    return hist;
}

double density_discrepancy(const DensityHistory& a, const DensityHistory& b, double t0, double t1) {
    const LatticeSpec& sa = a.spec;
    const LatticeSpec& sb = b.spec;
    if (sa.nx != sb.nx || sa.ny != sb.ny || sa.spacing != sb.spacing || sa.origin != sb.origin)
        throw GridMismatchError("density histories live on different lattices");
    if (a.times.size() != b.times.size()) throw GridMismatchError("density histories have different time grids");
    for (std::size_t k = 0; k < a.times.size(); ++k)
        if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(1.0, std::abs(a.times[k])))
            throw GridMismatchError("density histories have different time grids");
    const double h2 = sa.spacing * sa.spacing;
    double worst = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        if (a.times[k] < t0 || a.times[k] > t1) continue;
        any = true;
        double diff = 0.0;
        double mass = 0.0;
        for (std::size_t s = 0; s < a.densities[k].size(); ++s) {
            const double d = (a.densities[k][s] - b.densities[k][s]) / h2;
            diff += d * d * h2;
            mass += b.densities[k][s];
        }
        if (!(mass > 0.0)) throw DataError("reference density vanishes in the window");
        worst = std::max(worst, std::sqrt(diff) / mass);
    }
    if (!any) throw DataError("no recorded times inside the discrepancy window");
    return worst;
}

SplitPotential ElectricReference::potential_for(double delta) const {
    const double margin = 0.1 * schedule.hold_duration;
    const double start = schedule.split_start() + margin;
    const double end = schedule.split_end() - margin;
    return SplitPotential::constant(delta / (end - start) * spec.constants.hbar / spec.constants.charge, 0.0,
                                    start, end);
}

ElectricReference electric_reference() {
    ElectricReference ref;
    ref.schedule.geometry = SlabGeometry{{0.0, 0.0}, 1.0, 0.3, 0.5};
    ref.schedule.grow_duration = 0.05;
    ref.schedule.hold_duration = 0.05;
    ref.schedule.retract_duration = 0.05;
    ref.schedule.post_merge_duration = 0.05;
    ref.spec.nx = 96;
    ref.spec.ny = 96;
    ref.spec.spacing = 2.1 / 95.0;
    ref.spec.origin = {-1.05, -1.05};
    ref.spec.dt = 0.001;
    ref.u0.nx = ref.spec.nx;
    ref.u0.ny = ref.spec.ny;
    ref.u0.values.assign(ref.spec.size(), Complex{});
    const double sigma = 0.18;
    const auto mask = ref.schedule.mask(ref.spec, 0.0);
    double tot = 0.0;
    for (std::size_t s = 0; s < ref.spec.size(); ++s) {
        if (!mask[s]) continue;
        const Vec2 x = ref.spec.site(s);
        const double g = std::exp(-dot(x - Vec2{0.6, 0.0}, x - Vec2{0.6, 0.0}) / (4 * sigma * sigma)) +
                         std::exp(-dot(x + Vec2{0.6, 0.0}, x + Vec2{0.6, 0.0}) / (4 * sigma * sigma));
        ref.u0.values[s] = g;
        tot += g * g;
    }
    for (Complex& v : ref.u0.values) v /= std::sqrt(tot);
    return ref;
}

}  // namespace ablab
