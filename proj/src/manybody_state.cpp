#include "meanfield/manybody_state.hpp"

#include <algorithm>
#include <cmath>

#include "meanfield/errors.hpp"

namespace mf {

SubsetBasis::SubsetBasis(int sites, int particles) : sites_(sites), particles_(particles) {
    if (sites <= 0 || sites > 63)
        throw PreconditionError("subset basis supports 1..63 sites");
    if (particles < 0 || particles > sites)
        throw PreconditionError("particle number outside [0, sites]");

    binom_.assign(sites + 1, std::vector<std::size_t>(particles + 2, 0));
    for (int n = 0; n <= sites; ++n) {
        binom_[n][0] = 1;
        for (int k = 1; k <= std::min(n, particles + 1); ++k)
            binom_[n][k] = binom_[n - 1][k - 1] + (k <= n - 1 ? binom_[n - 1][k] : 0);
    }

    std::size_t count = binom_[sites][particles];
    states_.reserve(count);
    if (particles == 0) {
        states_.push_back(0);
        return;
    }
    // Gosper's hack walks subsets in increasing numeric order, which is colex order.
    Occupation s = (Occupation{1} << particles) - 1;
    Occupation limit = Occupation{1} << sites;
    while (s < limit) {
        states_.push_back(s);
        Occupation c = s & (~s + 1);
        Occupation r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
}

std::size_t SubsetBasis::binomial(int n, int k) {
    if (k < 0 || k > n)
        return 0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return static_cast<std::size_t>(std::llround(r));
}

std::size_t SubsetBasis::index(Occupation state) const {
    std::size_t rank = 0;
    int k = 1;
    while (state) {
        int pos = __builtin_ctzll(state);
        if (k <= particles_)
            rank += binom_[pos][k];
        ++k;
        state &= state - 1;
    }
    return rank;
}

cplx wavefunction_value(const ManyBodyState& psi, const SubsetBasis& basis,
                        const std::vector<int>& sites) {
    if (static_cast<int>(sites.size()) != psi.n_particles)
        throw PreconditionError("wavefunction_value: wrong number of coordinates");
    std::vector<int> sorted = sites;
    int inversions = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            if (sorted[i] == sorted[j])
                return {0.0, 0.0};
            if (sorted[i] > sorted[j])
                ++inversions;
        }
    std::sort(sorted.begin(), sorted.end());
    Occupation s = 0;
    for (int x : sorted)
        s |= Occupation{1} << x;
    double factorial = 1.0;
    for (int i = 2; i <= psi.n_particles; ++i)
        factorial *= i;
    double scale = 1.0 / std::sqrt(factorial * std::pow(psi.grid.cell_volume(), psi.n_particles));
    double sign = (inversions % 2) ? -1.0 : 1.0;
    return sign * scale * psi.amplitudes(static_cast<Eigen::Index>(basis.index(s)));
}

} // namespace mf
