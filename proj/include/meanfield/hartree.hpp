#pragma once

#include <functional>
#include <string>
#include <vector>

#include "meanfield/kernel.hpp"
#include "meanfield/potential.hpp"

namespace mf {

enum class Dispersion { nonrelativistic, pseudo_relativistic };

Dispersion parse_dispersion(const std::string& name);
std::string to_string(Dispersion d);

struct PropagatorConfig {
    double epsilon = 0.25;
    /// Macroscopic time step; negative values run the flow backwards.
    double dt = 0.01;
    Dispersion dispersion = Dispersion::nonrelativistic;
    bool exchange = false;
    /// Interaction prefactor eps^power; a negative value means eps^dim.
    int coupling_power = -1;
    /// Fixed-point corrections of the midpoint mean field; used only when the
    /// kick is not diagonal in position (exchange on).
    int self_consistency_iters = 1;

    double coupling(const Grid& grid) const;
    void validate() const;
};

/// Kinetic symbol on the dual lattice: eps^2 |k|^2 or sqrt(1 + eps^2 |k|^2).
RealVector kinetic_symbol(const Grid& grid, double epsilon, Dispersion dispersion);

/// One-body kinetic operator as a matrix in the orthonormal site basis.
/// Shared by the mean-field propagator and the exact many-body Hamiltonian.
Matrix one_body_matrix(const Grid& grid, double epsilon, Dispersion dispersion);

/// Direct mean field (V * rho)(x) with rho = eps^power omega(x; x).
/// Throws NumericalError naming the first non-finite grid site.
RealVector mean_field(const Matrix& omega, const Potential& v, double coupling);

/// Exchange operator X(x; y) = eps^power V(x - y) omega(x; y), orthonormal basis.
Matrix exchange_matrix(const Matrix& omega, const Potential& v, double coupling);

/// Strang-split one-step propagator:
///   half kinetic step, position kick with the mean field of the half-stepped
///   state, half kinetic step.
/// The kick leaves the density unchanged, so the Hartree map is explicit,
/// time-reversible and a unitary conjugation. With exchange on, the kick
/// generator is evaluated at the midpoint of the kick and refined by
/// fixed-point iterations.
class HartreePropagator {
public:
    HartreePropagator(Grid grid, Potential v, PropagatorConfig cfg);

    Matrix step(const Matrix& omega) const;
    OnePDM step(const OnePDM& omega) const;

    /// Mean field used by the most recent step's kick (diagonal part).
    const RealVector& last_mean_field() const { return last_field_; }

    const PropagatorConfig& config() const { return cfg_; }
    const Grid& grid() const { return grid_; }
    const Potential& potential() const { return v_; }

private:
    Grid grid_;
    Potential v_;
    PropagatorConfig cfg_;
    Fourier fourier_;
    Vector half_phase_;
    double coupling_;
    mutable RealVector last_field_;
};

OnePDM hartree_step(const OnePDM& omega, const Potential& v, PropagatorConfig cfg);
OnePDM relativistic_step(const OnePDM& omega, const Potential& v, PropagatorConfig cfg);
OnePDM hartree_fock_step(const OnePDM& omega, const Potential& v, PropagatorConfig cfg);

struct Trajectory {
    std::vector<double> times;
    std::vector<OnePDM> states;
};

/// Invoked with (time, state) on the configured stride, including t = 0 and the final time.
using StepCallback = std::function<void(double, const OnePDM&)>;

/// Integrate to t_final, which must be a nonnegative multiple of cfg.dt.
/// States are recorded every `stride` steps (and at the end).
Trajectory evolve(const OnePDM& omega0, const Potential& v, const PropagatorConfig& cfg,
                  double t_final, int stride = 1, const StepCallback& callback = {});

/// Number of steps for t_final; throws if t_final is not a multiple of dt.
int step_count(double t_final, double dt);

/// tr(T omega) + (eps^power / 2) sum_{x,y} V(x - y) n_x n_y with n the site occupations.
double hartree_energy(const OnePDM& omega, const Potential& v, const PropagatorConfig& cfg);

/// tr(-i eps grad) omega per axis.
Point total_momentum(const OnePDM& omega, double epsilon);

} // namespace mf
