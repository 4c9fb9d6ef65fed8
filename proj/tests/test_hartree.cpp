#include "doctest.h"

#include <chrono>
#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/hartree.hpp"
#include "meanfield/states.hpp"
#include "test_support.hpp"

using namespace mf;
using mf::testing::max_abs;

namespace {

struct Setup {
    Grid grid;
    Potential v;
    OnePDM omega;
    PropagatorConfig cfg;
};

// Plateau coherent state on [1, 3] in a box of length 4, eps = 1/4.
Setup coherent_setup(int m = 64, double dt = 0.01) {
    Grid g = Grid::cube(1, 4.0, m);
    PropagatorConfig cfg;
    cfg.epsilon = 0.25;
    cfg.dt = dt;
    DensityProfile prof =
        DensityProfile::plateau(g, Region::box({1.0, 0, 0}, {3.0, 0, 0}), 1.0 / cfg.epsilon, 0.5);
    OnePDM w = coherent_state({cfg.epsilon, -1.0, prof});
    return {g, Potential::gaussian(g, 1.0, 0.3), w, cfg};
}

double purity(const Matrix& w) { return (w - w * w).trace().real(); }

} // namespace

TEST_CASE("potential coefficients") {
    Grid g = Grid::cube(1, 2.0, 32);
    Potential v = Potential::gaussian(g, 2.0, 0.2);
    CHECK(v.fourier_real_and_even(1e-10));
    CHECK(v.pair(3, 5) == doctest::Approx(v.pair(5, 3)));
    CHECK(v.pair(0, 0) == doctest::Approx(2.0));
    // V_hat(0) = h sum V ~ v0 sigma sqrt(2 pi)
    CHECK(v.fourier()(0).real() == doctest::Approx(2.0 * 0.2 * std::sqrt(2 * M_PI)).epsilon(1e-6));
    RealVector s = v.smoothness_report(8);
    CHECK(s.allFinite());
    for (int m = 1; m <= 8; ++m)
        CHECK(s(m) > 0.0);
    // convolution against a brute-force sum
    RealVector f(32);
    for (int i = 0; i < 32; ++i)
        f(i) = std::cos(0.4 * i) + 0.1 * i;
    RealVector c = v.convolve(f);
    for (int x = 0; x < 32; ++x) {
        double direct = 0;
        for (int y = 0; y < 32; ++y)
            direct += g.cell_volume() * v.pair(x, y) * f(y);
        CHECK(c(x) == doctest::Approx(direct).epsilon(1e-10));
    }
    CHECK(Potential::zero(g).is_zero());
}

TEST_CASE("kinetic operator matches the spectral symbol") {
    Grid g = Grid::cube(1, 1.0, 16);
    Matrix t = one_body_matrix(g, 0.5, Dispersion::nonrelativistic);
    Vector f = plane_wave(g, 3) * std::sqrt(g.cell_volume());
    double k = g.momentum_norm(3);
    CHECK(max_abs(t * f - 0.25 * k * k * f) < 1e-10);
    Matrix r = one_body_matrix(g, 0.5, Dispersion::pseudo_relativistic);
    CHECK(max_abs(r * f - std::sqrt(1 + 0.25 * k * k) * f) < 1e-10);
}

TEST_CASE("free flow leaves the free gas invariant") {
    Grid g = Grid::cube(1, 1.0, 32);
    OnePDM w = free_fermi_gas(g, 1.0 / 13.0);
    PropagatorConfig cfg{1.0 / 13.0, 0.05};
    OnePDM out = hartree_step(w, Potential::zero(g), cfg);
    CHECK(max_abs(out.matrix() - w.matrix()) < 1e-12);
}

TEST_CASE("free gas is stationary under a translation-invariant interaction") {
    Grid g = Grid::cube(1, 1.0, 32);
    PropagatorConfig cfg{0.1, 0.01};
    OnePDM w = free_fermi_gas(g, cfg.epsilon);
    Trajectory tr = evolve(w, Potential::gaussian(g, 1.0, 0.1), cfg, 1.0, 100);
    CHECK(hs_norm(tr.states.back().matrix() - w.matrix()) <= 1e-8);
}

TEST_CASE("Hartree step is a unitary conjugation") {
    auto s = coherent_setup(32);
    RealVector ev0 = hermitian_spectrum(s.omega.matrix());
    NormReport n0 = norms(s.omega);
    double tr0 = s.omega.trace().real(), p0 = purity(s.omega.matrix());
    Trajectory tr = evolve(s.omega, s.v, s.cfg, 1.0, 10);
    for (const auto& w : tr.states) {
        CHECK((hermitian_spectrum(w.matrix()) - ev0).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(std::abs(w.trace().real() - tr0) <= 1e-9);
        CHECK(std::abs(purity(w.matrix()) - p0) <= 1e-9);
        NormReport n = norms(w);
        CHECK(std::abs(n.trace_norm - n0.trace_norm) <= 1e-9);
        CHECK(std::abs(n.hs_norm - n0.hs_norm) <= 1e-9);
    }
    // the state actually moved
    CHECK(hs_norm(tr.states.back().matrix() - s.omega.matrix()) > 1e-3);
}

TEST_CASE("momentum is conserved on the torus") {
    auto s = coherent_setup(64);
    // give the cloud a drift so the momentum is not zero by symmetry
    Vector phase(s.grid.size());
    for (std::size_t i = 0; i < s.grid.size(); ++i)
        phase(static_cast<Eigen::Index>(i)) = std::polar(1.0, 2 * M_PI / 4.0 * 3 * s.grid.position(i)[0]);
    OnePDM w = apply_function_of_position(
        apply_function_of_position(s.omega, phase, Side::left), phase.conjugate(), Side::right);
    Point p0 = total_momentum(w, s.cfg.epsilon);
    CHECK(std::abs(p0[0]) > 1.0);
    Trajectory tr = evolve(w, s.v, s.cfg, 0.5, 10);
    for (const auto& st : tr.states)
        CHECK(std::abs(total_momentum(st, s.cfg.epsilon)[0] - p0[0]) <= 1e-8);
}

TEST_CASE("reversing time returns to the initial state") {
    for (bool exchange : {false, true}) {
        auto s = coherent_setup(32);
        s.cfg.exchange = exchange;
        s.cfg.self_consistency_iters = 2;
        Trajectory fwd = evolve(s.omega, s.v, s.cfg, 0.1, 10);
        PropagatorConfig back = s.cfg;
        back.dt = -s.cfg.dt;
        HartreePropagator prop(s.grid, s.v, back);
        Matrix m = fwd.states.back().matrix();
        for (int k = 0; k < 10; ++k)
            m = prop.step(m);
        CHECK(max_abs(m - s.omega.matrix()) <= 1e-8);
    }
}

TEST_CASE("evolve bookkeeping") {
    auto s = coherent_setup(32);
    Trajectory zero = evolve(s.omega, s.v, s.cfg, 0.0);
    CHECK(zero.states.size() == 1);
    CHECK(max_abs(zero.states[0].matrix() - s.omega.matrix()) == 0.0);

    Trajectory full = evolve(s.omega, s.v, s.cfg, 0.2, 5);
    Trajectory a = evolve(s.omega, s.v, s.cfg, 0.1, 5);
    Trajectory b = evolve(a.states.back(), s.v, s.cfg, 0.1, 5);
    CHECK(max_abs(full.states.back().matrix() - b.states.back().matrix()) <= 1e-12);
    CHECK(full.times.size() == 5);

    int calls = 0;
    evolve(s.omega, s.v, s.cfg, 0.1, 3, [&](double, const OnePDM&) { ++calls; });
    CHECK(calls == 5); // t = 0, 3, 6, 9 steps and the final step 10

    CHECK_THROWS_AS(evolve(s.omega, s.v, s.cfg, 0.105), PreconditionError);
}

TEST_CASE("second-order convergence in dt") {
    auto s = coherent_setup(64, 0.02);
    auto final_state = [&](double dt) {
        PropagatorConfig cfg = s.cfg;
        cfg.dt = dt;
        return evolve(s.omega, s.v, cfg, 0.5, 1000).states.back().matrix();
    };
    Matrix a = final_state(0.02), b = final_state(0.01), c = final_state(0.005);
    double ratio = hs_norm(a - b) / hs_norm(b - c);
    CHECK(ratio >= 4.0 * 0.7);
    CHECK(ratio <= 4.0 * 1.3);

    auto drift = [&](double dt) {
        PropagatorConfig cfg = s.cfg;
        cfg.dt = dt;
        double e0 = hartree_energy(s.omega, s.v, cfg);
        Trajectory tr = evolve(s.omega, s.v, cfg, 0.5, 1000);
        return std::abs(hartree_energy(tr.states.back(), s.v, cfg) - e0);
    };
    double energy_ratio = drift(0.02) / drift(0.01);
    CHECK(energy_ratio >= 4.0 * 0.8);
    CHECK(energy_ratio <= 4.0 * 1.2);
}

TEST_CASE("pseudo-relativistic step") {
    Grid g = Grid::cube(1, 1.0, 32);
    PropagatorConfig cfg{0.02, 0.01};
    // plane wave: phase-only evolution
    OnePDM pw = slater_from_orbitals(g, {plane_wave(g, 4)});
    CHECK(max_abs(relativistic_step(pw, Potential::zero(g), cfg).matrix() - pw.matrix()) < 1e-12);

    // low modes: relative phases agree with 1 + eps^2 k^2 / 2 up to (eps k)^4 dt / eps
    for (std::size_t k : {1u, 2u, 3u}) {
        Vector psi = (plane_wave(g, 0) + plane_wave(g, k)) / std::sqrt(2.0);
        OnePDM w = slater_from_orbitals(g, {psi});
        Matrix rel = to_momentum(relativistic_step(w, Potential::zero(g), cfg)).matrix();
        Matrix nr = to_momentum(hartree_step(w, Potential::zero(g), cfg)).matrix();
        auto ki = static_cast<Eigen::Index>(k);
        double phase_rel = std::arg(rel(ki, 0));
        double phase_nr = std::arg(nr(ki, 0)) * 0.5; // nonrelativistic / 2
        double q = g.momentum_norm(k);
        double bound = std::pow(cfg.epsilon * q, 4) * cfg.dt / cfg.epsilon;
        CHECK(std::abs(phase_rel - phase_nr) <= bound);
    }
}

TEST_CASE("Hartree-Fock reduces to Hartree without interaction") {
    auto s = coherent_setup(32);
    Potential zero = Potential::zero(s.grid);
    CHECK(max_abs(hartree_fock_step(s.omega, zero, s.cfg).matrix() -
                  hartree_step(s.omega, zero, s.cfg).matrix()) < 1e-12);
}

TEST_CASE("exchange cancels self-interaction of a tight orbital") {
    Grid g = Grid::cube(1, 4.0, 64);
    Potential v = Potential::gaussian(g, 1.0, 0.5);
    OnePDM w = slater_from_orbitals(g, {gaussian_orbital(g, {2.0, 0, 0}, 0.1)});
    double c = 0.25;
    RealVector direct = mean_field(w.matrix(), v, c);
    Matrix d = direct.cast<cplx>().asDiagonal();
    Matrix x = exchange_matrix(w.matrix(), v, c);
    double with_exchange = trace_norm((d - x) * w.matrix() - w.matrix() * (d - x));
    double direct_only = trace_norm(d * w.matrix() - w.matrix() * d);
    CHECK(with_exchange <= direct_only);
}

TEST_CASE("exchange is subleading along a coherent-state run") {
    auto s = coherent_setup(64, 0.01);
    Trajectory h = evolve(s.omega, s.v, s.cfg, 0.5, 1000);
    PropagatorConfig hf = s.cfg;
    hf.exchange = true;
    Trajectory x = evolve(s.omega, s.v, hf, 0.5, 1000);
    double gap = hs_norm(x.states.back().matrix() - h.states.back().matrix());
    double motion = hs_norm(h.states.back().matrix() - s.omega.matrix());
    CHECK(gap <= motion);
}

TEST_CASE("non-finite mean field names the site") {
    Grid g = Grid::cube(1, 1.0, 8);
    Matrix w = Matrix::Zero(8, 8);
    w(5, 5) = cplx(std::numeric_limits<double>::infinity(), 0.0);
    CHECK_THROWS_AS(mean_field(w, Potential::gaussian(g, 1.0, 0.1), 1.0), NumericalError);
    PropagatorConfig bad{0.1, 0.0};
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
}
