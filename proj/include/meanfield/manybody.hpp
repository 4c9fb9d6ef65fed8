#pragma once

#include <functional>
#include <vector>

#include "meanfield/hartree.hpp"
#include "meanfield/manybody_state.hpp"

namespace mf {

/// Largest subset-basis dimension C(M, N) the exact oracle accepts.
inline constexpr std::size_t kMaxOracleDimension = 200000;

/// Compressed-row Hermitian matrix over the subset basis.
struct SparseHermitian {
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<cplx> val;

    std::size_t rows() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
    std::size_t nonzeros() const { return val.size(); }
    void apply(const Vector& x, Vector& y) const;
    Matrix dense() const;
};

/// H = sum_i T_i + coupling sum_{i<j} V(x_i - x_j) on the N-particle subset basis.
///
/// T is the same one-body matrix the mean-field propagator uses, so both sides
/// of a comparison share the spatial discretization.
class ManyBodyHamiltonian {
public:
    ManyBodyHamiltonian(const Grid& grid, int particles, const Potential& v, double epsilon,
                        Dispersion dispersion = Dispersion::nonrelativistic,
                        int coupling_power = -1);
    /// Explicit kinetic matrix and coupling (used by the Kac-rescaled form).
    ManyBodyHamiltonian(const Grid& grid, int particles, const Potential& v, const Matrix& one_body,
                        double coupling);

    const Grid& grid() const { return grid_; }
    int particles() const { return particles_; }
    const SubsetBasis& basis() const { return basis_; }
    const Matrix& one_body() const { return one_body_; }
    double coupling() const { return coupling_; }
    const SparseHermitian& matrix() const { return h_; }

    Vector apply(const Vector& x) const;
    double expectation(const Vector& x) const;
    /// Spectral enclosure [lower, upper] from one-body eigenvalues and V bounds.
    double lower_bound() const { return lower_; }
    double upper_bound() const { return upper_; }

private:
    void build(const Potential& v);

    Grid grid_;
    int particles_;
    SubsetBasis basis_;
    Matrix one_body_;
    double coupling_;
    SparseHermitian h_;
    double lower_ = 0.0;
    double upper_ = 0.0;
};

struct KrylovOptions {
    int dimension = 30;
    /// Local error bound per substep, ||y_m - y_{m-1}||.
    double tolerance = 1e-10;
    /// Initial substep keeps ||H|| * tau <= this.
    double max_phase = 10.0;
};

struct KrylovStats {
    int substeps = 0;
    int halvings = 0;
    int breakdowns = 0;
    long matvecs = 0;
    double max_local_error = 0.0;
};

/// Hermitian operator given by its action and a spectral enclosure [lower, upper].
struct HermitianAction {
    std::function<void(const Vector&, Vector&)> apply;
    double lower = 0.0;
    double upper = 0.0;
};

/// exp(-i H tau) x by restarted Lanczos with full reorthogonalization.
/// Substeps start at ||H - c|| tau <= max_phase (c the enclosure midpoint) and
/// are halved until the local error estimate meets the tolerance.
Vector krylov_expv(const HermitianAction& h, const Vector& x, double tau,
                   const KrylovOptions& opts = {}, KrylovStats* stats = nullptr);
Vector krylov_expv(const ManyBodyHamiltonian& h, const Vector& x, double tau,
                   const KrylovOptions& opts = {}, KrylovStats* stats = nullptr);

/// psi_t = exp(-i H t / eps) psi.
ManyBodyState exact_evolve(const ManyBodyState& psi, const ManyBodyHamiltonian& h, double t,
                           double epsilon, const KrylovOptions& opts = {},
                           KrylovStats* stats = nullptr);

/// Dense eigendecomposition reference for small dimensions.
ManyBodyState dense_evolve(const ManyBodyState& psi, const ManyBodyHamiltonian& h, double t,
                           double epsilon);

/// gamma(i, j) = <psi, a*_j a_i psi> in the orthonormal site basis.
OnePDM reduce_one_pdm(const ManyBodyState& psi);

/// Throws CapExceeded when C(M, N) exceeds the oracle cap.
void check_oracle_cap(const Grid& grid, int particles);

struct KacCheckResult {
    double distance = 0.0;
    /// Largest one-particle weight within the top eighth of |k| on the grid.
    double aliasing = 0.0;
    KrylovStats kac_stats;
    KrylovStats eps_stats;
};

/// Compare the Kac-regime evolution (unit eps, interaction gamma^{-d} V(x / gamma)
/// on the box dilated by gamma, time gamma t) against the eps = 1 / gamma
/// evolution for time t. The dilation maps grid data one-to-one, so the
/// distance is the L2 distance of amplitude vectors.
/// Throws PreconditionError when the aliasing metric exceeds `max_aliasing`.
KacCheckResult kac_equivalence_check(const ManyBodyState& psi, const PotentialSpec& v,
                                     double gamma_scale, double t, double max_aliasing = 1e-3,
                                     const KrylovOptions& opts = {});

/// Share of the one-particle momentum distribution in the outer eighth of the band.
double aliasing_metric(const ManyBodyState& psi);

struct ConvergenceRecord {
    double time = 0.0;
    double hs_distance = 0.0;
    double trace_distance = 0.0;
    /// 2 tr gamma (1 - omega)
    double fluct_number = 0.0;
    /// tr omega (1 - omega) of the mean-field state.
    double purity = 0.0;
    double particles = 0.0;
};

/// Evolve psi_0 exactly and omega_0 under the mean-field flow, recording
/// distances at each requested time (ascending, multiples of cfg.dt).
/// Each record is checked against ||gamma - omega||_HS^2 <= 2 tr gamma (1 - omega) + 1e-9.
/// The mean-field states at the requested times are appended to `mean_field_states` if given.
std::vector<ConvergenceRecord> convergence_series(const ManyBodyState& psi0, const OnePDM& omega0,
                                                  const Potential& v, const PropagatorConfig& cfg,
                                                  const std::vector<double>& times,
                                                  const KrylovOptions& opts = {},
                                                  std::vector<OnePDM>* mean_field_states = nullptr);

ConvergenceRecord convergence_distance(const ManyBodyState& psi0, const OnePDM& omega0,
                                       const Potential& v, const PropagatorConfig& cfg, double t,
                                       const KrylovOptions& opts = {});

/// Distances between a reduced density matrix and a mean-field state.
ConvergenceRecord compare_states(double time, const OnePDM& gamma, const OnePDM& omega);

} // namespace mf
