#pragma once

#include <cstdint>
#include <vector>

#include "meanfield/grid.hpp"

namespace mf {

using Occupation = std::uint64_t;

/// All N-element subsets of M sites, ordered colexicographically.
///
/// Subset S = {s_1 < ... < s_N} labels the orthonormal Slater vector
/// a^*(e_{s_1}) ... a^*(e_{s_N}) Omega built from normalized site functions.
/// Fermionic signs follow from this ordering: moving a creation operator for
/// site j into place picks up (-1)^{#occupied sites below j}.
class SubsetBasis {
public:
    SubsetBasis(int sites, int particles);

    int sites() const { return sites_; }
    int particles() const { return particles_; }
    std::size_t size() const { return states_.size(); }

    Occupation state(std::size_t index) const { return states_[index]; }
    std::size_t index(Occupation state) const;

    static std::size_t binomial(int n, int k);

private:
    int sites_;
    int particles_;
    std::vector<Occupation> states_;
    std::vector<std::vector<std::size_t>> binom_;
};

/// Sign (-1)^{number of occupied sites strictly below `site`}.
inline double ordering_sign(Occupation state, int site) {
    Occupation below = site == 0 ? 0 : (state & ((Occupation{1} << site) - 1));
    return (__builtin_popcountll(below) & 1) ? -1.0 : 1.0;
}

/// Antisymmetric N-particle wave function on a one-dimensional grid.
///
/// Amplitudes are coefficients in the orthonormal subset basis, so
/// <psi, psi> = sum |amp|^2. The pointwise wave function is
/// psi(x_{s_1}, ..., x_{s_N}) = amp_S / sqrt(N! h^N) with the sign of the
/// sorting permutation for unsorted arguments.
struct ManyBodyState {
    Grid grid;
    int n_particles;
    Vector amplitudes;

    double norm() const { return amplitudes.norm(); }
};

/// Amplitude of the antisymmetric wave function at the ordered tuple of sites
/// `sites` (any order, repeated sites give 0), in units of the pointwise value.
cplx wavefunction_value(const ManyBodyState& psi, const SubsetBasis& basis,
                        const std::vector<int>& sites);

} // namespace mf
