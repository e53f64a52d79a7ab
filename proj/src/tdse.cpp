#include "ablab/tdse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "ablab/errors.hpp"

namespace ablab {

namespace {

// Plain complex products; avoids the NaN-recovery path of operator* in hot loops.
inline Complex cmul(const Complex& a, const Complex& b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline Complex cmul_conj(const Complex& a, const Complex& b) {  // conj(a) * b
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

Complex inner(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        const Complex p = cmul_conj(a[s], b[s]);
        re += p.real();
        im += p.imag();
    }
    return {re, im};
}

double norm2(const std::vector<Complex>& a) {
    double acc = 0.0;
    for (const Complex& v : a) acc += v.real() * v.real() + v.imag() * v.imag();
    return std::sqrt(acc);
}

double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * std::numbers::pi);
    if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
    return r;
}

void check_field(const Lattice& lattice, const Field& field) {
    const auto& sp = lattice.spec();
    if (field.nx != sp.nx || field.ny != sp.ny || field.values.size() != sp.size())
        throw GridMismatchError("field shape " + std::to_string(field.nx) + "x" +
                                std::to_string(field.ny) + " does not match lattice " +
                                std::to_string(sp.nx) + "x" + std::to_string(sp.ny));
}

std::vector<std::uint8_t> force_ring(std::vector<std::uint8_t> mask, int nx, int ny) {
    for (int i = 0; i < nx; ++i) {
        mask[static_cast<std::size_t>(i)] = 0;
        mask[static_cast<std::size_t>(ny - 1) * nx + i] = 0;
    }
    for (int j = 0; j < ny; ++j) {
        mask[static_cast<std::size_t>(j) * nx] = 0;
        mask[static_cast<std::size_t>(j) * nx + nx - 1] = 0;
    }
    return mask;
}

}  // namespace

void LatticeSpec::validate() const {
    if (nx < 16 || ny < 16) throw DomainError("lattice needs at least 16 sites per side");
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw DomainError("lattice spacing must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step must be positive");
    constants.validate();
}

std::pair<int, int> LatticeSpec::nearest(const Vec2& p) const {
    const int i = static_cast<int>(std::lround((p.x - origin.x) / spacing));
    const int j = static_cast<int>(std::lround((p.y - origin.y) / spacing));
    return {std::clamp(i, 0, nx - 1), std::clamp(j, 0, ny - 1)};
}

Lattice::Lattice(LatticeSpec spec, std::vector<std::uint8_t> mask, std::vector<double> link_x,
                 std::vector<double> link_y, std::vector<double> potential_energy)
    : spec_(spec),
      mask_(std::move(mask)),
      link_x_(std::move(link_x)),
      link_y_(std::move(link_y)),
      potential_energy_(std::move(potential_energy)) {
    spec_.validate();
    const std::size_t n = spec_.size();
    if (mask_.size() != n || link_x_.size() != n || link_y_.size() != n ||
        potential_energy_.size() != n)
        throw GridMismatchError("lattice arrays do not match the grid size");
    mask_ = force_ring(std::move(mask_), spec_.nx, spec_.ny);
    rebuild_factors();
}

std::size_t Lattice::interior_count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

Lattice Lattice::with_mask(std::vector<std::uint8_t> mask) const {
    return Lattice(spec_, std::move(mask), link_x_, link_y_, potential_energy_);
}

Lattice Lattice::with_links(std::vector<double> link_x, std::vector<double> link_y) const {
    return Lattice(spec_, mask_, std::move(link_x), std::move(link_y), potential_energy_);
}

Lattice Lattice::with_potential_energy(std::vector<double> potential_energy) const {
    return Lattice(spec_, mask_, link_x_, link_y_, std::move(potential_energy));
}

double Lattice::plaquette(int i, int j) const {
    if (i < 0 || j < 0 || i >= spec_.nx - 1 || j >= spec_.ny - 1)
        throw DomainError("plaquette index out of range");
    return link_x_[spec_.index(i, j)] + link_y_[spec_.index(i + 1, j)] -
           link_x_[spec_.index(i, j + 1)] - link_y_[spec_.index(i, j)];
}

void Lattice::rebuild_factors() {
    const int nx = spec_.nx;
    const int ny = spec_.ny;
    const std::size_t n = spec_.size();
    const double tau =
        spec_.constants.hbar * spec_.constants.hbar / (2.0 * spec_.constants.mass * spec_.spacing * spec_.spacing);
    const bool fourth = spec_.stencil == StencilOrder::Fourth;
    const double diag = fourth ? 5.0 * tau : 4.0 * tau;
    nn_weight_ = fourth ? (4.0 / 3.0) * tau : tau;
    nnn_weight_ = fourth ? tau / 12.0 : 0.0;

    hop_x_.assign(n, Complex{});
    hop_y_.assign(n, Complex{});
    hop_xx_.assign(n, Complex{});
    hop_yy_.assign(n, Complex{});
    diagonal_.assign(n, 0.0);
    auto phase = [](double theta) { return Complex{std::cos(theta), -std::sin(theta)}; };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t s = spec_.index(i, j);
            if (!mask_[s]) continue;
            diagonal_[s] = diag + potential_energy_[s];
            if (i + 1 < nx && mask_[s + 1]) hop_x_[s] = phase(link_x_[s]);
            if (j + 1 < ny && mask_[s + nx]) hop_y_[s] = phase(link_y_[s]);
            if (fourth && i + 2 < nx && mask_[s + 1] && mask_[s + 2])
                hop_xx_[s] = phase(link_x_[s] + link_x_[s + 1]);
            if (fourth && j + 2 < ny && mask_[s + nx] && mask_[s + 2 * nx])
                hop_yy_[s] = phase(link_y_[s] + link_y_[s + nx]);
        }
    }
}

void Lattice::apply_hamiltonian(const std::vector<Complex>& u, std::vector<Complex>& out) const {
    const int nx = spec_.nx;
    const int ny = spec_.ny;
    const std::size_t n = spec_.size();
    if (u.size() != n) throw GridMismatchError("vector size does not match lattice");
    out.assign(n, Complex{});
    const std::size_t sx = static_cast<std::size_t>(nx);
    const bool fourth = nnn_weight_ != 0.0;
    for (int j = 1; j < ny - 1; ++j) {
        const bool up2 = fourth && j + 2 < ny;
        const bool down2 = fourth && j >= 2;
        for (int i = 1; i < nx - 1; ++i) {
            const std::size_t s = spec_.index(i, j);
            if (!mask_[s]) continue;
            Complex nn = cmul(hop_x_[s], u[s + 1]) + cmul_conj(hop_x_[s - 1], u[s - 1]) +
                         cmul(hop_y_[s], u[s + sx]) + cmul_conj(hop_y_[s - sx], u[s - sx]);
            Complex acc = diagonal_[s] * u[s] - nn_weight_ * nn;
            if (fourth) {
                // x neighbors two away stay in-row because hop_xx_ is zero at the row end.
                Complex nnn = cmul(hop_xx_[s], u[s + 2]) + cmul_conj(hop_xx_[s - 2], u[s - 2]);
                if (up2) nnn += cmul(hop_yy_[s], u[s + 2 * sx]);
                if (down2) nnn += cmul_conj(hop_yy_[s - 2 * sx], u[s - 2 * sx]);
                acc += nnn_weight_ * nnn;
            }
            out[s] = acc;
        }
    }
}

Lattice build_lattice(const Scene& scene, const VectorPotential& potential, const LatticeSpec& spec,
                      const std::function<double(Vec2)>& electric_potential) {
    spec.validate();
    const Box& bound = scene.bound();
    const double slack = 1e-9 * spec.spacing;
    const Vec2 far = spec.site(spec.nx - 1, spec.ny - 1);
    if (spec.origin.x > bound.min.x + slack || spec.origin.y > bound.min.y + slack ||
        far.x < bound.max.x - slack || far.y < bound.max.y - slack)
        throw DomainError("lattice does not cover the scene bound");
    for (std::size_t k = 0; k < scene.size(); ++k) {
        if (2.0 * scene.obstacles()[k].radius < 2.0 * spec.spacing)
            throw ResolutionError("obstacle " + std::to_string(k) +
                                  " is narrower than two lattice spacings");
    }

    const std::size_t n = spec.size();
    std::vector<std::uint8_t> mask(n, 1);
    std::vector<double> lx(n, 0.0), ly(n, 0.0), ve(n, 0.0);
    const double h = spec.spacing;
    for (int j = 0; j < spec.ny; ++j) {
        for (int i = 0; i < spec.nx; ++i) {
            const std::size_t s = spec.index(i, j);
            const Vec2 p = spec.site(i, j);
            for (const Disk& d : scene.obstacles()) {
                if (norm(p - d.center) <= d.radius) {
                    mask[s] = 0;
                    break;
                }
            }
            if (i + 1 < spec.nx) lx[s] = potential.edge_phase(p, p + Vec2{h, 0.0});
            if (j + 1 < spec.ny) ly[s] = potential.edge_phase(p, p + Vec2{0.0, h});
            if (electric_potential) ve[s] = spec.constants.charge * electric_potential(p);
        }
    }
    return Lattice(spec, std::move(mask), std::move(lx), std::move(ly), std::move(ve));
}

PacketInit init_packet(const Lattice& lattice, const BeamSpec& beam) {
    beam.validate();
    const LatticeSpec& sp = lattice.spec();
    const double q = sp.constants.mass * beam.wavenumber / sp.constants.hbar;
    const Vec2 w = beam.direction;
    const Vec2 t = perp(w);
    PacketInit out;
    out.field.nx = sp.nx;
    out.field.ny = sp.ny;
    out.field.values.assign(sp.size(), Complex{});
    double kept = 0.0;
    double clipped = 0.0;
    for (std::size_t s = 0; s < sp.size(); ++s) {
        const Vec2 x = sp.site(s);
        const Vec2 r = x - beam.anchor;
        const double env = beam.cutoff(dot(r, t) / beam.transverse_width) *
                           beam.cutoff(dot(r, w) / beam.longitudinal_width);
        if (env == 0.0) continue;
        if (!lattice.interior(s)) {
            clipped += env * env;
            continue;
        }
        kept += env * env;
        const double ph = q * dot(w, x);
        out.field.values[s] = env * Complex{std::cos(ph), std::sin(ph)};
    }
    if (!(kept > 0.0)) throw ExperimentDesignError("packet window contains no interior sites");
    const double scale = 1.0 / std::sqrt(kept);
    for (Complex& v : out.field.values) v *= scale;
    out.clipped_fraction = clipped / (kept + clipped);
    return out;
}

Field attach_path_phase(const Lattice& lattice, const Field& field, const Vec2& reference) {
    check_field(lattice, field);
    const LatticeSpec& sp = lattice.spec();
    const auto [i0, j0] = sp.nearest(reference);
    const auto& lx = lattice.link_x();
    const auto& ly = lattice.link_y();
    // Lambda along the reference row.
    std::vector<double> row(static_cast<std::size_t>(sp.nx), 0.0);
    for (int i = i0 + 1; i < sp.nx; ++i) row[i] = row[i - 1] + lx[sp.index(i - 1, j0)];
    for (int i = i0 - 1; i >= 0; --i) row[i] = row[i + 1] - lx[sp.index(i, j0)];
    Field out = field;
    std::vector<double> col(static_cast<std::size_t>(sp.ny), 0.0);
    for (int i = 0; i < sp.nx; ++i) {
        col[j0] = row[i];
        for (int j = j0 + 1; j < sp.ny; ++j) col[j] = col[j - 1] + ly[sp.index(i, j - 1)];
        for (int j = j0 - 1; j >= 0; --j) col[j] = col[j + 1] - ly[sp.index(i, j)];
        for (int j = 0; j < sp.ny; ++j) {
            const std::size_t s = sp.index(i, j);
            out.values[s] = cmul(field.values[s], Complex{std::cos(col[j]), std::sin(col[j])});
        }
    }
    return out;
}

Field step(const Lattice& lattice, const Field& field, StepStats* stats) {
    check_field(lattice, field);
    const LatticeSpec& sp = lattice.spec();
    const std::size_t n = sp.size();
    const double kappa = sp.dt / (2.0 * sp.constants.hbar);
    const Complex ik{0.0, kappa};

    std::vector<Complex> hu;
    lattice.apply_hamiltonian(field.values, hu);
    std::vector<Complex> b(n);
    for (std::size_t s = 0; s < n; ++s)
        b[s] = lattice.interior(s) ? field.values[s] - cmul(ik, hu[s]) : Complex{};

    // Jacobi preconditioner for A = 1 + i kappa H.
    std::vector<Complex> minv(n, Complex{1.0, 0.0});
    for (std::size_t s = 0; s < n; ++s)
        if (lattice.interior(s)) minv[s] = 1.0 / (Complex{1.0, 0.0} + ik * lattice.diagonal()[s]);
    auto apply_a = [&](const std::vector<Complex>& x, std::vector<Complex>& y) {
        lattice.apply_hamiltonian(x, y);
        for (std::size_t s = 0; s < n; ++s) y[s] = x[s] + cmul(ik, y[s]);
    };

    const double bnorm = norm2(b);
    Field out;
    out.nx = sp.nx;
    out.ny = sp.ny;
    out.time = field.time + sp.dt;
    if (bnorm == 0.0) {
        out.values.assign(n, Complex{});
        if (stats) *stats = {};
        return out;
    }
    const double tol = 1e-10 * bnorm;

    std::vector<Complex> x = b;
    std::vector<Complex> r(n), ax(n);
    apply_a(x, ax);
    for (std::size_t s = 0; s < n; ++s) r[s] = b[s] - ax[s];
    std::vector<Complex> rhat = r;
    std::vector<Complex> p(n, Complex{}), v(n, Complex{}), ph(n), sv(n), sh(n), t(n);
    Complex rho{1.0, 0.0}, alpha{1.0, 0.0}, omega{1.0, 0.0};
    double rnorm = norm2(r);
    int it = 0;
    constexpr int max_iterations = 2000;
    while (rnorm > tol) {
        if (it >= max_iterations)
            throw SolverError("Crank-Nicolson solve did not converge", rnorm / bnorm);
        ++it;
        const Complex rho_new = inner(rhat, r);
        if (std::abs(rho_new) < 1e-300) {
            rhat = r;  // restart on breakdown
            std::fill(p.begin(), p.end(), Complex{});
            std::fill(v.begin(), v.end(), Complex{});
            rho = alpha = omega = Complex{1.0, 0.0};
            continue;
        }
        const Complex beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t s = 0; s < n; ++s) {
            p[s] = r[s] + cmul(beta, p[s] - cmul(omega, v[s]));
            ph[s] = cmul(minv[s], p[s]);
        }
        apply_a(ph, v);
        alpha = rho / inner(rhat, v);
        for (std::size_t s = 0; s < n; ++s) sv[s] = r[s] - cmul(alpha, v[s]);
        if (norm2(sv) <= tol) {
            for (std::size_t s = 0; s < n; ++s) x[s] += cmul(alpha, ph[s]);
            break;
        }
        for (std::size_t s = 0; s < n; ++s) sh[s] = cmul(minv[s], sv[s]);
        apply_a(sh, t);
        const Complex tt = inner(t, t);
        omega = inner(t, sv) / tt;
        for (std::size_t s = 0; s < n; ++s) {
            x[s] += cmul(alpha, ph[s]) + cmul(omega, sh[s]);
            r[s] = sv[s] - cmul(omega, t[s]);
        }
        rnorm = norm2(r);
    }
    // True residual for reporting.
    apply_a(x, ax);
    double res = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const Complex d = b[s] - ax[s];
        res += std::norm(d);
    }
    if (stats) *stats = {it, std::sqrt(res) / bnorm};
    for (std::size_t s = 0; s < n; ++s)
        if (!lattice.interior(s)) x[s] = Complex{};
    out.values = std::move(x);
    return out;
}

Evolution evolve(const Lattice& lattice, const Field& field, int n_steps,
                 const std::vector<Probe>& probes) {
    if (n_steps < 0) throw DomainError("step count must be non-negative");
    check_field(lattice, field);
    for (const Probe& pr : probes)
        for (std::size_t s : pr.sites)
            if (s >= lattice.spec().size()) throw DomainError("probe '" + pr.name + "' has a site off the grid");
    Evolution ev;
    ev.field = field;
    for (int k = 1; k <= n_steps; ++k) {
        ev.field = step(lattice, ev.field);
        for (const Probe& pr : probes) {
            double acc = 0.0;
            for (std::size_t s : pr.sites) acc += std::norm(ev.field.values[s]);
            ev.records.push_back({k, ev.field.time, pr.name, acc});
        }
    }
    return ev;
}

double total_probability(const Field& field) {
    double acc = 0.0;
    for (const Complex& v : field.values) acc += std::norm(v);
    return acc;
}

std::vector<double> site_probabilities(const Field& field) {
    std::vector<double> out(field.values.size());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = std::norm(field.values[s]);
    return out;
}

GaugedPair lattice_gauge_transform(const Lattice& lattice, const Field& field,
                                   const std::vector<double>& phase) {
    check_field(lattice, field);
    const LatticeSpec& sp = lattice.spec();
    if (phase.size() != sp.size()) throw GridMismatchError("gauge phase does not match the grid");
    std::vector<double> lx = lattice.link_x();
    std::vector<double> ly = lattice.link_y();
    for (int j = 0; j < sp.ny; ++j) {
        for (int i = 0; i < sp.nx; ++i) {
            const std::size_t s = sp.index(i, j);
            if (i + 1 < sp.nx) lx[s] += phase[s + 1] - phase[s];
            if (j + 1 < sp.ny) ly[s] += phase[s + sp.nx] - phase[s];
        }
    }
    Field f = field;
    for (std::size_t s = 0; s < f.values.size(); ++s)
        f.values[s] = cmul(field.values[s], Complex{std::cos(phase[s]), std::sin(phase[s])});
    return {lattice.with_links(std::move(lx), std::move(ly)), std::move(f)};
}

double sample_bilinear(const LatticeSpec& spec, const std::vector<double>& values, const Vec2& p) {
    if (values.size() != spec.size()) throw GridMismatchError("values do not match the grid");
    const double fx = (p.x - spec.origin.x) / spec.spacing;
    const double fy = (p.y - spec.origin.y) / spec.spacing;
    if (fx < 0.0 || fy < 0.0 || fx > spec.nx - 1 || fy > spec.ny - 1)
        throw DomainError("sample point lies outside the lattice");
    const int i = std::min(static_cast<int>(fx), spec.nx - 2);
    const int j = std::min(static_cast<int>(fy), spec.ny - 2);
    const double a = fx - i;
    const double c = fy - j;
    return (1 - a) * (1 - c) * values[spec.index(i, j)] + a * (1 - c) * values[spec.index(i + 1, j)] +
           (1 - a) * c * values[spec.index(i, j + 1)] + a * c * values[spec.index(i + 1, j + 1)];
}

namespace {

struct LinearFit {
    double c0, a1, a2, rss;
};

LinearFit fit_at(const std::vector<double>& s, const std::vector<double>& y, double kappa) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), 3);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        m(r, 0) = 1.0;
        m(r, 1) = std::cos(kappa * s[k]);
        m(r, 2) = std::sin(kappa * s[k]);
        rhs(r) = y[k];
    }
    const Eigen::Vector3d c = m.colPivHouseholderQr().solve(rhs);
    const double rss = (m * c - rhs).squaredNorm();
    return {c(0), c(1), c(2), rss};
}

}  // namespace

FringeFit fit_fringes(const std::vector<double>& s, const std::vector<double>& density,
                      double kappa_seed) {
    if (s.size() != density.size() || s.size() < 8)
        throw DataError("fringe fit needs at least 8 matching samples");
    if (!(kappa_seed > 0.0) || !std::isfinite(kappa_seed))
        throw DataError("fringe wavenumber seed must be positive");
    const double lo = 0.75 * kappa_seed;
    const double hi = 1.25 * kappa_seed;
    constexpr int grid = 401;
    double best_k = kappa_seed;
    double best_rss = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid; ++g) {
        const double k = lo + (hi - lo) * g / (grid - 1);
        const double rss = fit_at(s, density, k).rss;
        if (rss < best_rss) {
            best_rss = rss;
            best_k = k;
        }
    }
    // Golden-section refinement inside the neighboring grid cells.
    const double cell = (hi - lo) / (grid - 1);
    double a = std::max(lo, best_k - cell);
    double b = std::min(hi, best_k + cell);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = fit_at(s, density, c).rss;
    double fd = fit_at(s, density, d).rss;
    for (int it = 0; it < 80 && b - a > 1e-14 * kappa_seed; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = fit_at(s, density, c).rss;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = fit_at(s, density, d).rss;
        }
    }
    const double k = 0.5 * (a + b);
    const LinearFit lf = fit_at(s, density, k);
    FringeFit out;
    out.kappa = k;
    out.offset = lf.c0;
    out.amplitude = std::hypot(lf.a1, lf.a2);
    out.phase = wrap_angle(std::atan2(lf.a2, -lf.a1));
    out.residual_rms = std::sqrt(lf.rss / static_cast<double>(s.size()));
    return out;
}

FringeRecord two_beam_experiment(const Scene& scene, const VectorPotential& potential,
                                 const BeamSpec& beam1, const BeamSpec& beam2,
                                 const LatticeSpec& spec, int n_steps, const ScreenSpec& screen) {
    beam1.validate();
    beam2.validate();
    if (n_steps <= 0) throw DomainError("two-beam experiment needs a positive step count");
    if (std::abs(beam1.wavenumber - beam2.wavenumber) > 1e-12 * beam1.wavenumber)
        throw ExperimentDesignError("beams must share one wavenumber");
    if (std::abs(norm(screen.direction) - 1.0) > 1e-12)
        throw DomainError("screen direction must be a unit vector");
    if (screen.samples < 8 || !(screen.half_length > 0.0))
        throw DomainError("screen needs a positive length and at least 8 samples");

    const Lattice lattice = build_lattice(scene, potential, spec);
    const LatticeSpec& sp = lattice.spec();
    const double q = sp.constants.mass * beam1.wavenumber / sp.constants.hbar;
    const double speed = sp.constants.hbar * q / sp.constants.mass;
    const double horizon = n_steps * sp.dt;

    // Geometric overlap of the two windows after free flight.
    const Vec2 c1 = beam1.anchor + beam1.direction * (speed * horizon);
    const Vec2 c2 = beam2.anchor + beam2.direction * (speed * horizon);
    auto window = [](const BeamSpec& b, const Vec2& center, const Vec2& x) {
        const Vec2 r = x - center;
        return b.cutoff(dot(r, perp(b.direction)) / b.transverse_width) *
               b.cutoff(dot(r, b.direction) / b.longitudinal_width);
    };
    double o12 = 0.0, o11 = 0.0, o22 = 0.0;
    for (std::size_t s = 0; s < sp.size(); ++s) {
        const Vec2 x = sp.site(s);
        const double w1 = window(beam1, c1, x);
        const double w2 = window(beam2, c2, x);
        o12 += w1 * w2;
        o11 += w1 * w1;
        o22 += w2 * w2;
    }
    const double overlap = (o11 > 0.0 && o22 > 0.0) ? o12 / std::sqrt(o11 * o22) : 0.0;
    if (overlap < 1e-3)
        throw ExperimentDesignError("packets do not overlap at the readout time (overlap " +
                                    std::to_string(overlap) + ")");

    const PacketInit p1 = init_packet(lattice, beam1);
    const PacketInit p2 = init_packet(lattice, beam2);
    const Vec2 reference = (beam1.anchor + beam2.anchor) * 0.5;
    const Field v1 = attach_path_phase(lattice, p1.field, reference);
    const Field v2 = attach_path_phase(lattice, p2.field, reference);
    Field u0 = v1;
    for (std::size_t s = 0; s < u0.values.size(); ++s) u0.values[s] = v1.values[s] - v2.values[s];
    const double nrm = std::sqrt(total_probability(u0));
    if (!(nrm > 0.0)) throw ExperimentDesignError("the two packets cancel exactly");
    for (Complex& v : u0.values) v /= nrm;

    Evolution ev = evolve(lattice, u0, n_steps);

    Vec2 dir = screen.direction;
    const Vec2 dq = (beam1.direction - beam2.direction) * q;
    double kappa_seed = dot(dq, dir);
    if (kappa_seed < 0.0) {
        dir = dir * -1.0;
        kappa_seed = -kappa_seed;
    }
    if (kappa_seed * screen.half_length < std::numbers::pi)
        throw ExperimentDesignError("screen is shorter than one fringe");

    const std::vector<double> rho = site_probabilities(ev.field);
    FringeRecord rec;
    const double fit_window = screen.fit_half_window > 0.0 ? screen.fit_half_window : screen.half_length;
    std::vector<double> fs, fd;
    for (int k = 0; k < screen.samples; ++k) {
        const double sv = -screen.half_length + 2.0 * screen.half_length * k / (screen.samples - 1);
        const double val = sample_bilinear(sp, rho, screen.center + dir * sv);
        rec.screen_positions.push_back(sv);
        rec.screen_density.push_back(val);
        if (std::abs(sv) <= fit_window) {
            fs.push_back(sv);
            fd.push_back(val);
        }
    }
    rec.fit = fit_fringes(fs, fd, kappa_seed);
    rec.fringe_phase = wrap_angle(rec.fit.phase - dot(dq, screen.center));
    rec.overlap = overlap;
    rec.clipped_fraction = std::max(p1.clipped_fraction, p2.clipped_fraction);
    rec.final_field = std::move(ev.field);
    return rec;
}

}  // namespace ablab
