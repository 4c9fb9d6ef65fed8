#pragma once

#include <vector>

#include "meanfield/kernel.hpp"
#include "meanfield/manybody_state.hpp"

namespace mf {

/// Fermi constant kappa_d with |B_1| kappa_d^d = (2 pi)^d, so that a ball of
/// radius kappa_d rho^{1/d} holds (2 pi)^d rho phase-space volume.
double fermi_constant(int dim);

/// Volume of the unit ball in dimension d.
double unit_ball_volume(int dim);

/// Nonnegative density on the grid, in particles per unit volume.
struct DensityProfile {
    Grid grid;
    RealVector rho;
    Region support;
    /// Recorded constant C in rho <= C eps^{-d}; filled by record_bounds().
    double density_bound = 0.0;
    /// Recorded constant C in X_Lambda rho^{2/d} <= C eps^{-2}.
    double localization_bound = 0.0;

    double total_particles() const { return rho.sum() * grid.cell_volume(); }

    /// Constant density on the whole box.
    static DensityProfile uniform(const Grid& grid, double density);

    /// Density `peak` on `region`, falling to zero with a cos^2 ramp of the
    /// given width outside it; zero further out.
    static DensityProfile plateau(const Grid& grid, const Region& region, double peak,
                                  double ramp_width);

    /// Rescale so that the discrete integral equals n.
    DensityProfile normalized_to(double n) const;

    /// Measure the constants of the standing density assumptions for this eps.
    void record_bounds(double epsilon);
};

struct CoherentStateSpec {
    double epsilon = 0.1;
    /// Gaussian width; <= 0 selects the default sqrt(eps).
    double delta = -1.0;
    DensityProfile profile;

    double width() const;
    double kappa() const { return fermi_constant(profile.grid.dim()); }
};

/// Metadata returned alongside a coherent state.
struct CoherentStateInfo {
    double target_particles = 0.0;
    double raw_trace = 0.0;
    double rescale_factor = 1.0;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

/// Projector onto the dual momenta with |q| <= 1/eps.
OnePDM free_fermi_gas(const Grid& grid, double epsilon);

/// Projector onto exactly n plane waves: the n smallest |q|, ties broken by
/// lexicographic order of the integer mode vectors.
OnePDM free_fermi_gas_with_particles(const Grid& grid, int n);

/// Dual-lattice sites selected by free_fermi_gas_with_particles, in selection order.
std::vector<std::size_t> lowest_modes(const Grid& grid, int n);

/// Phase-space superposition of Gaussian wave packets filling the local Fermi
/// ball of radius kappa_d rho(r)^{1/d}, rescaled to trace N = int rho.
OnePDM coherent_state(const CoherentStateSpec& spec, CoherentStateInfo* info = nullptr);

/// Grid function exp(i q.x), normalized in L^2 of the box.
Vector plane_wave(const Grid& grid, std::size_t mode_site);

/// Normalized periodic Gaussian exp(-|x - c|^2 / (2 w^2)) exp(i k.(x - c)).
Vector gaussian_orbital(const Grid& grid, const Point& center, double width, const Point& k = {});

/// Sum of |f_j><f_j| for orthonormal grid functions f_j.
OnePDM slater_from_orbitals(const Grid& grid, const std::vector<Vector>& orbitals);

/// Antisymmetrized product f_1 ^ ... ^ f_N as an exact N-body state; N <= 5.
ManyBodyState slater_many_body(const Grid& grid, const std::vector<Vector>& orbitals);

/// Orbitals of the occupied subspace of a rank-N projector, as grid functions.
std::vector<Vector> occupied_orbitals(const OnePDM& projector, double tol = 1e-8);

/// Largest N accepted by slater_many_body.
inline constexpr int kMaxOracleParticles = 5;

} // namespace mf
