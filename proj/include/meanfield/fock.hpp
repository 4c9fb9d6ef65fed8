#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "meanfield/manybody.hpp"

namespace mf {

/// Largest number of lattice modes for Fock-space work.
inline constexpr int kMaxFockModes = 14;
/// Largest lattice for the fluctuation dynamics.
inline constexpr int kMaxFluctuationModes = 12;

using FockOperator = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

/// Amplitudes over the 2^M occupation bitstrings of M lattice modes.
///
/// Bit i of the index is the occupation of mode i (grid site i). Creation
/// operators carry the Jordan-Wigner sign (-1)^{#occupied modes below i}, so
/// an N-particle configuration has the same sign as in the subset basis.
struct FockVector {
    int n_modes = 0;
    Vector amplitudes;

    static FockVector vacuum(int modes);
    double norm() const { return amplitudes.norm(); }
};

void check_fock_modes(int modes);

/// a_i and a*_i for a single mode.
FockOperator annihilation_operator(int modes, int site);
FockOperator creation_operator(int modes, int site);

/// a(f) = sum_i conj(f_i) a_i and a*(f) = sum_i f_i a*_i for f in orthonormal mode coordinates.
FockOperator annihilate(const Vector& f);
FockOperator create(const Vector& f);

FockVector apply_operator(const FockOperator& op, const FockVector& v);

FockOperator number_operator(int modes);
/// (-1)^N, diagonal.
FockOperator parity_operator(int modes);

/// dG(J) = sum_ij J_ij a*_i a_j.
FockOperator second_quantize(const Matrix& j);
/// sum_ij J_ij a_i a_j and sum_ij J_ij a*_i a*_j.
FockOperator pair_annihilation(const Matrix& j);
FockOperator pair_creation(const Matrix& j);

/// gamma_ij = <psi, a*_j a_i psi>.
Matrix one_pdm(const FockVector& psi);
double number_expectation(const FockVector& psi);

/// a*(f_1) ... a*(f_N) Omega.
FockVector slater_fock(const std::vector<Vector>& orbitals);

/// Embed an N-particle subset-basis state into Fock space and back.
FockVector to_fock(const ManyBodyState& psi);
ManyBodyState to_many_body(const FockVector& v, const Grid& grid, int particles);

/// sum_ij T_ij a*_i a_j + coupling sum_{x<y} V_xy n_x n_y, with the spectral enclosure
/// used by the Krylov propagator.
struct FockHamiltonian {
    FockOperator matrix;
    double lower = 0.0;
    double upper = 0.0;

    static FockHamiltonian build(const Matrix& one_body, const Eigen::MatrixXd& pair, double coupling);
    /// Same one-body operator and coupling as the many-body oracle on a grid.
    static FockHamiltonian on_grid(const Grid& grid, const Potential& v, double epsilon,
                                   Dispersion dispersion = Dispersion::nonrelativistic,
                                   int coupling_power = -1);
    HermitianAction action() const;
};

/// Global phase convention for R.
///   vacuum:     R Omega equals the Slater vector exactly; then R^2 = (-1)^{N(N-1)/2},
///               so R^* = R only for N = 0, 1 mod 4.
///   involution: R^* = R = R^{-1} exactly; then R Omega is the Slater vector up to
///               a factor i for N = 2, 3 mod 4.
/// Both satisfy R^* a(f_j) R = a^*(f_j) (j <= N), a(f_j) (j > N).
enum class BogoliubovPhase { vacuum, involution };

/// Particle-hole transformation for a rank-N projector on the lattice modes.
///
/// R = c T_1 ... T_N with T_j = (a^*(f_j) + a(f_j)) (-1)^N (1 - 2 a^*(f_j) a(f_j)).
/// Each T_j is unitary and conjugates a(f_j) into a^*(f_j) while leaving every
/// a(g), g orthogonal to f_j, fixed; c is the phase fixed by the convention.
class BogoliubovMap {
public:
    explicit BogoliubovMap(const Matrix& projector, BogoliubovPhase phase = BogoliubovPhase::vacuum,
                           double tol = 1e-8);

    int modes() const { return modes_; }
    int particles() const { return particles_; }
    /// Orthonormal basis of mode space; the first N columns span the projector's range.
    const Matrix& orbitals() const { return orbitals_; }
    cplx phase() const { return phase_; }
    BogoliubovPhase convention() const { return convention_; }

    FockVector apply(const FockVector& v) const;
    FockVector apply_adjoint(const FockVector& v) const;
    /// The Slater vector a*(f_1) ... a*(f_N) Omega for the stored orbitals.
    FockVector slater() const;
    /// Dense 2^M x 2^M matrix; M <= 10.
    Matrix dense() const;

private:
    int modes_;
    int particles_;
    Matrix orbitals_;
    std::vector<FockOperator> creators_;
    std::vector<FockOperator> annihilators_;
    cplx phase_ = 1.0;
    BogoliubovPhase convention_;
};

struct FluctuationSample {
    double time = 0.0;
    /// <xi_t, N xi_t>
    double number = 0.0;
    /// 2 tr gamma_t (1 - omega_t) of the many-body state psi_t = R_{omega_t} xi_t.
    double fluctuation_number = 0.0;
};

/// xi_t = R^*_{omega_t} exp(-i H t / eps) R_{omega_0} xi_0 at the given times.
/// `omegas[k]` is the mean-field projector (orthonormal mode coordinates) at times[k];
/// omegas[0] must be the projector at time 0 that defines R_{omega_0}.
std::vector<FluctuationSample> fluctuation_dynamics(const FockVector& xi0,
                                                    const std::vector<Matrix>& omegas,
                                                    const FockHamiltonian& h,
                                                    const std::vector<double>& times,
                                                    double epsilon,
                                                    const KrylovOptions& opts = {});

} // namespace mf
