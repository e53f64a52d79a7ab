#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ablab/gauge_field.hpp"
#include "ablab/geometry.hpp"
#include "ablab/go_engine.hpp"

namespace ablab {

using Complex = std::complex<double>;

/// Kinetic-energy stencil. Fourth order keeps packet group velocities within
/// about 1% of the continuum at 8 sites per wavelength; second order is the
/// plain 5-point Peierls Laplacian.
enum class StencilOrder { Second, Fourth };

struct LatticeSpec {
    int nx{64};
    int ny{64};
    double spacing{1.0};
    Vec2 origin{};
    double dt{0.1};
    PhysicalConstants constants{};
    StencilOrder stencil{StencilOrder::Fourth};

    /// Throws DomainError unless nx, ny >= 16 and spacing, dt > 0.
    void validate() const;

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
    }
    Vec2 site(int i, int j) const { return origin + Vec2{i * spacing, j * spacing}; }
    Vec2 site(std::size_t idx) const {
        return site(static_cast<int>(idx % static_cast<std::size_t>(nx)),
                    static_cast<int>(idx / static_cast<std::size_t>(nx)));
    }
    /// Nearest lattice indices to a point (clamped to the grid).
    std::pair<int, int> nearest(const Vec2& p) const;
};

/// Complex wavefunction on lattice sites, row-major (x fastest). Zero on masked sites.
struct Field {
    int nx{0};
    int ny{0};
    std::vector<Complex> values;
    double time{0.0};

    std::size_t size() const { return values.size(); }
};

/// Discretized exterior domain with Peierls link phases.
///
/// Link phases live on nearest-neighbor edges: link_x[s] belongs to s -> s+1
/// (x direction) and link_y[s] to s -> s+nx. Reversed edges carry the negated
/// phase; longer hops use the sum along the straight path.
class Lattice {
public:
    Lattice(LatticeSpec spec, std::vector<std::uint8_t> mask, std::vector<double> link_x,
            std::vector<double> link_y, std::vector<double> potential_energy);

    const LatticeSpec& spec() const { return spec_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }
    const std::vector<double>& link_x() const { return link_x_; }
    const std::vector<double>& link_y() const { return link_y_; }
    const std::vector<double>& potential_energy() const { return potential_energy_; }
    /// Diagonal of H on interior sites.
    const std::vector<double>& diagonal() const { return diagonal_; }

    bool interior(std::size_t s) const { return mask_[s] != 0; }
    std::size_t interior_count() const;

    /// Same links and potential on a new mask (the outer ring is always forced to Dirichlet).
    Lattice with_mask(std::vector<std::uint8_t> mask) const;
    Lattice with_links(std::vector<double> link_x, std::vector<double> link_y) const;
    Lattice with_potential_energy(std::vector<double> potential_energy) const;

    /// Sum of the four link phases around the plaquette with lower-left corner (i, j),
    /// counterclockwise.
    double plaquette(int i, int j) const;

    /// H u (Peierls kinetic term plus e V), zero on masked sites.
    void apply_hamiltonian(const std::vector<Complex>& u, std::vector<Complex>& out) const;

private:
    void rebuild_factors();

    LatticeSpec spec_;
    std::vector<std::uint8_t> mask_;
    std::vector<double> link_x_;
    std::vector<double> link_y_;
    std::vector<double> potential_energy_;

    // Cached hopping factors exp(-i theta) toward +x, +y, +2x, +2y and the diagonal.
    std::vector<Complex> hop_x_;
    std::vector<Complex> hop_y_;
    std::vector<Complex> hop_xx_;
    std::vector<Complex> hop_yy_;
    std::vector<double> diagonal_;
    double nn_weight_{0.0};
    double nnn_weight_{0.0};
};

/// Mask (obstacle interiors and the outer ring excluded), exact edge phases,
/// and e V on every site. Throws DomainError if the grid does not cover the
/// scene bound and ResolutionError for obstacles narrower than two spacings.
Lattice build_lattice(const Scene& scene, const VectorPotential& potential, const LatticeSpec& spec,
                      const std::function<double(Vec2)>& electric_potential = {});

struct PacketInit {
    Field field;
    /// Share of the window's weight that fell on masked sites (0 when nothing was clipped).
    double clipped_fraction{0.0};
};

/// chi0(transverse / delta1) chi0(longitudinal / delta2) exp(i m k omega.x / hbar),
/// sampled on the lattice, zeroed on masked sites and normalized to sum |u|^2 = 1.
PacketInit init_packet(const Lattice& lattice, const BeamSpec& beam);

/// Multiplies the field by exp(i Lambda), Lambda(x) being the sum of link phases along the
/// staircase path (first along x, then along y) from `reference` to x. In a region free of
/// flux this is the lattice version of the geometric-optics factor exp(i integral A . dx).
Field attach_path_phase(const Lattice& lattice, const Field& field, const Vec2& reference);

struct StepStats {
    int iterations{0};
    double relative_residual{0.0};
};

/// One Crank-Nicolson step (1 + i dt H / 2 hbar) u+ = (1 - i dt H / 2 hbar) u,
/// solved by Jacobi-preconditioned BiCGSTAB to a relative residual of 1e-10.
/// Throws SolverError if the iteration cap is hit.
Field step(const Lattice& lattice, const Field& field, StepStats* stats = nullptr);

struct Probe {
    std::string name;
    std::vector<std::size_t> sites;
};

struct ProbeRecord {
    int step{0};
    double time{0.0};
    std::string probe_name;
    double value{0.0};
};

struct Evolution {
    Field field;
    std::vector<ProbeRecord> records;
};

/// n_steps of `step`; each probe records sum |u|^2 over its sites after every step.
Evolution evolve(const Lattice& lattice, const Field& field, int n_steps,
                 const std::vector<Probe>& probes = {});

/// Total probability sum |u|^2.
double total_probability(const Field& field);

/// |u|^2 per site.
std::vector<double> site_probabilities(const Field& field);

struct GaugedPair {
    Lattice lattice;
    Field field;
};

/// field' = exp(i chi) field, link' = link + chi(head) - chi(tail).
GaugedPair lattice_gauge_transform(const Lattice& lattice, const Field& field,
                                   const std::vector<double>& phase);

/// Straight screen line on which fringes are read out.
struct ScreenSpec {
    Vec2 center;
    Vec2 direction{1.0, 0.0};
    double half_length{20.0};
    int samples{161};
    /// Half-width of the window used for the cosine fit (defaults to half_length).
    double fit_half_window{0.0};
};

struct FringeFit {
    double offset{0.0};
    double amplitude{0.0};
    double kappa{0.0};
    /// phi in density ~ c0 - c1 cos(kappa s + phi), wrapped to (-pi, pi].
    double phase{0.0};
    double residual_rms{0.0};
};

/// Least-squares fit of c0 - c1 cos(kappa s + phi) with kappa searched within
/// +-25% of `kappa_seed` and c1 >= 0.
FringeFit fit_fringes(const std::vector<double>& s, const std::vector<double>& density,
                      double kappa_seed);

struct FringeRecord {
    std::vector<double> screen_positions;
    std::vector<double> screen_density;
    FringeFit fit;
    /// Fitted phase minus the kinematic term (q1 - q2) . screen_center, wrapped.
    double fringe_phase{0.0};
    /// Predicted geometric overlap of the two packet windows at the readout time.
    double overlap{0.0};
    double clipped_fraction{0.0};
    Field final_field;
};

/// Launches v1 - v2 from two beams (both dressed with path phases from the midpoint
/// of their anchors), evolves n_steps and fits the fringe pattern on the screen.
/// Throws ExperimentDesignError when the packets would not overlap (< 1e-3).
FringeRecord two_beam_experiment(const Scene& scene, const VectorPotential& potential,
                                 const BeamSpec& beam1, const BeamSpec& beam2,
                                 const LatticeSpec& spec, int n_steps, const ScreenSpec& screen);

/// Bilinear interpolation of site values at an arbitrary point.
double sample_bilinear(const LatticeSpec& spec, const std::vector<double>& values, const Vec2& p);

}  // namespace ablab
