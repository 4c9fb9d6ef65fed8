#pragma once

#include <cstdint>
#include <vector>

#include "meanfield/hartree.hpp"

namespace mf {

/// W_z^(n)(t) = (1 + |x(t) - z|^{4n})^{-1} with x(t) the freely evolved position,
/// realized as U(t) diag(w_z) U(t)^* for the free propagator U(t) = exp(i t T / eps).
struct LocalizationOperator {
    Point center{0.0, 0.0, 0.0};
    int power = 2;
    double time = 0.0;
    double epsilon = 1.0;
    OnePDM kernel;
};

/// (1 + |x - z|^{4n})^{-1} on the grid sites, periodic distance.
RealVector localization_profile(const Grid& grid, const Point& z, int n);

LocalizationOperator localization_operator(const Grid& grid, const Point& z, int n, double t,
                                           double epsilon,
                                           Dispersion dispersion = Dispersion::nonrelativistic);

/// Free propagator exp(i t T(k) / eps) as a Fourier multiplier.
Vector free_phase(const Grid& grid, double t, double epsilon, Dispersion dispersion);

/// X_Lambda(z) = 1 + dist(z, Lambda)^4 on grid sites.
struct DomainWeight {
    Region region;
    RealVector values;

    static DomainWeight build(const Grid& grid, const Region& region);
};

/// Sample sets for the semiclassical functionals.
struct SemiclassicalParams {
    int n = 2;
    double epsilon = 0.1;
    Region lambda = Region::full();
    /// Every z_stride-th grid point along each axis.
    int z_stride = 1;
    /// Dual-lattice sites of the sampled momenta; empty selects every p with |p| <= 1/eps.
    std::vector<std::size_t> p_sites;
    std::vector<double> times{0.0};
    Dispersion dispersion = Dispersion::nonrelativistic;
};

struct SemiclassicalReport {
    /// sup X(z) (1 + |p|)^{-1} ||W_z(t) [e^{ip.x}, omega]||_tr
    double comm_functional = 0.0;
    /// sup X(z) sum_axes ||W_z(t) [eps d_a, omega]||_tr
    double grad_functional = 0.0;
    /// sup X(z) ||W_z(t) omega||_tr
    double mass_functional = 0.0;
    /// sup tr W_z^(1)(t) omega
    double concentration = 0.0;
    /// Multiplied by eps^{d-1}, eps^{d-1}, eps^d, eps^d (eps^2, eps^2, eps^3, eps^3 in 3D).
    double comm_scaled = 0.0;
    double grad_scaled = 0.0;
    double mass_scaled = 0.0;
    double concentration_scaled = 0.0;

    /// The sample set actually used.
    int n = 2;
    double epsilon = 0.0;
    std::vector<std::size_t> z_sites;
    std::vector<std::size_t> p_sites;
    std::vector<double> times;
    bool weighted = false;
};

/// Dual-lattice sites with |p| <= 1/eps.
std::vector<std::size_t> momenta_within(const Grid& grid, double radius);
/// Grid sites on a stride along each axis.
std::vector<std::size_t> strided_sites(const Grid& grid, int stride);

/// Exact (SVD) trace norms over the sample set. Throws PreconditionError on
/// empty sample sets or sampled momenta with |p| > 1/eps.
SemiclassicalReport semiclassical_report(const OnePDM& omega, const SemiclassicalParams& params);

/// ||[e^{ip.x}, omega]||_tr for the dual momentum at `p_site` (no localization weight).
double plane_wave_commutator_norm(const OnePDM& omega, std::size_t p_site);

/// ||[omega, F(x - z)]||_tr for the function F sampled by `f`, centered at grid site z.
double commutator_with_function(const OnePDM& omega, const Potential& f, std::size_t z_site);

struct ConcentrationSeries {
    std::vector<double> times;
    /// sup_z tr W_z^(1)(t) omega_t
    std::vector<double> values;
    /// values * eps^d
    std::vector<double> scaled;
    /// First time the value exceeds twice its initial value; negative when it never does.
    double t_star = -1.0;
    /// Smallest C with scaled(t) <= C exp(C t) on the whole series.
    double envelope_constant = 0.0;
};

/// The free evolution inside W is used for the nonrelativistic dispersion;
/// for the pseudo-relativistic one W_z is the plain multiplication operator.
ConcentrationSeries concentration_series(const Trajectory& traj, double epsilon, int z_stride = 1,
                                         Dispersion dispersion = Dispersion::nonrelativistic);
double concentration(const OnePDM& omega, double t, double epsilon, int z_stride = 1,
                     Dispersion dispersion = Dispersion::nonrelativistic);

/// Smallest C > 0 with y_k <= C exp(C t_k) for all samples.
double envelope_constant(const std::vector<double>& t, const std::vector<double>& y);

struct TransportRatio {
    /// max over the probe set of <phi, U* W_z(t0) U phi> / <phi, W_{z + eps p (t - s)}(t0 + t - s) phi>
    double probe_ratio = 0.0;
    /// The same supremum over all phi (largest generalized eigenvalue).
    double exact_ratio = 0.0;
    int probes = 0;
};

struct TransportProbe {
    Point z{0.0, 0.0, 0.0};
    int n = 2;
    double t0 = 0.0;
    Point p{0.0, 0.0, 0.0};
    double s = 0.0;
    double t = 0.0;
    int probes = 32;
    std::uint64_t seed = 1;
};

/// U_p(t; s) solves i eps d_t U = (T + V * rho_t + i eps^2 p.grad) U along the
/// Hartree trajectory of omega0. Probes are random Gaussian wave packets.
TransportRatio localization_transport_ratio(const OnePDM& omega0, const Potential& v,
                                            const PropagatorConfig& cfg, const TransportProbe& probe);

/// tr omega (1 - omega)
double purity(const OnePDM& omega);
/// 2 tr gamma (1 - omega)
double fluctuation_number(const OnePDM& gamma, const OnePDM& omega);

/// Number of particles on sites farther than `margin` from the region.
double mass_outside(const OnePDM& omega, const Region& region, double margin);

} // namespace mf
