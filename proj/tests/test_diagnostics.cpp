#include "doctest.h"

#include <cmath>

#include "meanfield/diagnostics.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/states.hpp"
#include "test_support.hpp"

using namespace mf;
using mf::testing::max_abs;

namespace {

// |{q : chi(q) != chi(q + p)}| for the ball |q| <= radius on the dual lattice.
int shifted_ball_mismatch(const Grid& g, std::size_t p_site, double radius) {
    int count = 0;
    for (std::size_t q = 0; q < g.size(); ++q) {
        bool in = g.momentum_norm(q) <= radius;
        bool shifted = g.momentum_norm(g.shifted_mode(q, p_site)) <= radius;
        count += in != shifted;
    }
    return count;
}

OnePDM free_evolved(const OnePDM& omega, double tau, double eps) {
    Fourier f(omega.grid());
    Matrix w = f.conjugate_by_multiplier(to_position(omega).matrix(),
                                         free_phase(omega.grid(), -tau, eps, Dispersion::nonrelativistic));
    return OperatorKernel::from_matrix(omega.grid(), w);
}

} // namespace

TEST_CASE("localization operator") {
    Grid g = Grid::cube(1, 1.0, 32);
    Point z{0.25, 0.0, 0.0};
    LocalizationOperator w0 = localization_operator(g, z, 2, 0.0, 0.1);
    Matrix m0 = w0.kernel.matrix();
    std::size_t zs = 8;
    CHECK(m0(zs, zs).real() == 1.0);
    Matrix direct = localization_profile(g, z, 2).cast<cplx>().asDiagonal();
    CHECK(max_abs(m0 - direct) == 0.0);

    LocalizationOperator wt = localization_operator(g, z, 2, 0.7, 0.1);
    CHECK(wt.kernel.is_hermitian(1e-12));
    RealVector a = hermitian_spectrum(m0), b = hermitian_spectrum(wt.kernel.matrix());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(b.maxCoeff() <= 1.0 + 1e-12);
    CHECK(b.minCoeff() > 0.0);
    CHECK_THROWS_AS(localization_profile(g, z, 0), PreconditionError);
}

TEST_CASE("domain weight") {
    Grid g = Grid::cube(1, 4.0, 32);
    DomainWeight x = DomainWeight::build(g, Region::box({1.0, 0, 0}, {2.0, 0, 0}));
    CHECK(x.values.minCoeff() == 1.0);
    CHECK(x.values(12) == 1.0);
    CHECK(x.values(0) == doctest::Approx(2.0));            // distance 1
    CHECK(x.values(28) == doctest::Approx(1.0 + std::pow(1.5, 4)));  // x = 3.5: 1.5 either way round
    DomainWeight whole = DomainWeight::build(g, Region::full());
    CHECK(whole.values.maxCoeff() == 1.0);
}

TEST_CASE("free gas plane-wave commutator equals the shifted-ball mode count") {
    for (double eps : {1.0 / 8.0, 1.0 / 16.0}) {
        Grid g = Grid::cube(1, 1.0, 64);
        OnePDM w = free_fermi_gas(g, eps);
        for (std::size_t p : momenta_within(g, 1.0 / eps)) {
            double got = plane_wave_commutator_norm(w, p);
            CHECK(std::abs(got - shifted_ball_mismatch(g, p, 1.0 / eps)) < 1e-8);
        }
    }
    Grid g2 = Grid::cube(2, 1.0, 12);
    OnePDM w2 = free_fermi_gas(g2, 0.1);
    for (std::size_t p : momenta_within(g2, 10.0))
        CHECK(std::abs(plane_wave_commutator_norm(w2, p) - shifted_ball_mismatch(g2, p, 10.0)) < 1e-8);
}

TEST_CASE("semiclassical report basics") {
    Grid g = Grid::cube(1, 1.0, 32);
    SemiclassicalParams params;
    params.epsilon = 1.0 / 8.0;
    params.z_stride = 4;
    params.times = {0.0, 0.2};

    SemiclassicalReport zero = semiclassical_report(OnePDM::zero(g), params);
    CHECK(zero.comm_functional == 0.0);
    CHECK(zero.grad_functional == 0.0);
    CHECK(zero.mass_functional == 0.0);
    CHECK(zero.concentration == 0.0);
    CHECK(zero.z_sites.size() == 8);

    OnePDM gas = free_fermi_gas(g, params.epsilon);
    SemiclassicalReport r = semiclassical_report(gas, params);
    CHECK(r.grad_functional < 1e-10);
    CHECK(r.comm_functional > 0.0);
    CHECK(r.mass_scaled == doctest::Approx(r.mass_functional * params.epsilon));
    CHECK(r.comm_scaled == doctest::Approx(r.comm_functional));

    // Rerun with the same sample set is bit-for-bit identical.
    SemiclassicalReport again = semiclassical_report(gas, params);
    CHECK(again.comm_functional == r.comm_functional);
    CHECK(again.mass_functional == r.mass_functional);

    SemiclassicalParams bad = params;
    bad.p_sites = {16};
    CHECK_THROWS_AS(semiclassical_report(gas, bad), PreconditionError);
    bad = params;
    bad.times.clear();
    CHECK_THROWS_AS(semiclassical_report(gas, bad), PreconditionError);
}

TEST_CASE("mass and concentration functionals transport under the free flow") {
    Grid g = Grid::cube(1, 2.0, 32);
    const double eps = 0.125;
    OnePDM w = slater_from_orbitals(g, {gaussian_orbital(g, {0.6, 0, 0}, 0.2, {8.0, 0, 0})});
    const double tau = 0.3;
    OnePDM moved = free_evolved(w, tau, eps);
    SemiclassicalParams params;
    params.epsilon = eps;
    params.p_sites = {0};
    params.times = {0.0};
    SemiclassicalReport now = semiclassical_report(moved, params);
    params.times = {tau};
    SemiclassicalReport before = semiclassical_report(w, params);
    CHECK(now.mass_functional == doctest::Approx(before.mass_functional).epsilon(1e-10));
    CHECK(now.concentration == doctest::Approx(before.concentration).epsilon(1e-10));
}

TEST_CASE("commutator with a smooth function") {
    Grid g = Grid::cube(1, 1.0, 64);
    OnePDM w = slater_from_orbitals(g, {gaussian_orbital(g, {0.5, 0, 0}, 0.03)});
    RealVector ones = RealVector::Constant(64, 2.5);
    CHECK(commutator_with_function(w, Potential::from_samples(g, ones), 0) < 1e-12);
    Potential f = Potential::gaussian(g, 1.0, 0.04);
    CHECK(commutator_with_function(w, f, 0) < 1e-6);
    CHECK(commutator_with_function(w, f, 28) > 1e-3);

    // free gas with a single Fourier mode of F reduces to the plane-wave commutator
    OnePDM gas = free_fermi_gas(g, 1.0 / 12.0);
    RealVector cosine(64);
    for (int s = 0; s < 64; ++s)
        cosine(s) = std::cos(2.0 * M_PI * 3 * g.position(s)[0]);
    double c = commutator_with_function(gas, Potential::from_samples(g, cosine), 0);
    // cos = (e^{ipx} + e^{-ipx}) / 2; the two shifted-ball pieces act on disjoint output modes
    CHECK(c <= 0.5 * (plane_wave_commutator_norm(gas, 3) + plane_wave_commutator_norm(gas, 61)) + 1e-9);
    CHECK(c > 0.0);
}

TEST_CASE("concentration series") {
    Grid g = Grid::cube(1, 1.0, 32);
    const double eps = 0.1;
    PropagatorConfig cfg;
    cfg.epsilon = eps;
    cfg.dt = 0.01;
    OnePDM gas = free_fermi_gas(g, eps);
    Trajectory traj = evolve(gas, Potential::gaussian(g, 1.0, 0.1), cfg, 0.2, 5);
    ConcentrationSeries s = concentration_series(traj, eps);
    REQUIRE(s.values.size() == 5);
    for (double v : s.values)
        CHECK(v == doctest::Approx(s.values.front()).epsilon(1e-9));
    CHECK(s.t_star < 0);
    CHECK(s.scaled.front() == doctest::Approx(s.values.front() * eps));

    // envelope constant: C exp(C t) dominates every sample, and is minimal
    std::vector<double> t{0.0, 0.5, 1.0}, y{0.5, 2.0, 1.0};
    double c = envelope_constant(t, y);
    for (std::size_t k = 0; k < t.size(); ++k)
        CHECK(c * std::exp(c * t[k]) >= y[k] * (1 - 1e-12));
    CHECK((c * 0.999) * std::exp(c * 0.999 * 0.5) < 2.0);
}

TEST_CASE("localization transport ratio") {
    Grid g = Grid::cube(1, 1.0, 32);
    PropagatorConfig cfg;
    cfg.epsilon = 0.125;
    cfg.dt = 0.01;
    OnePDM gas = free_fermi_gas(g, cfg.epsilon);
    TransportProbe probe;
    probe.z = {0.5, 0, 0};
    probe.t0 = 0.1;
    probe.s = 0.0;
    probe.t = 0.2;

    // free dynamics: exact transport identity whenever eps p (t - s) is a whole number of cells
    for (double p : {0.0, 2.5, -5.0}) {
        probe.p = {p, 0, 0};
        TransportRatio r = localization_transport_ratio(gas, Potential::zero(g), cfg, probe);
        CHECK(r.exact_ratio == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.probe_ratio == doctest::Approx(1.0).epsilon(1e-9));
    }

    // t = s
    probe.p = {0, 0, 0};
    TransportProbe same = probe;
    same.s = same.t = 0.1;
    TransportRatio r0 = localization_transport_ratio(gas, Potential::gaussian(g, 1.0, 0.1), cfg, same);
    CHECK(r0.exact_ratio == doctest::Approx(1.0).epsilon(1e-9));

    // interacting: finite, probe supremum below the exact one, stable under doubling
    Potential v = Potential::gaussian(g, 2.0, 0.1);
    probe.probes = 64;
    TransportRatio a = localization_transport_ratio(gas, v, cfg, probe);
    probe.probes = 128;
    TransportRatio b = localization_transport_ratio(gas, v, cfg, probe);
    CHECK(std::isfinite(a.exact_ratio));
    CHECK(a.probe_ratio <= a.exact_ratio * (1 + 1e-9));
    CHECK(b.probe_ratio == doctest::Approx(a.probe_ratio).epsilon(0.05));
}

TEST_CASE("purity and fluctuation number") {
    std::mt19937_64 rng(31);
    Grid g = Grid::cube(1, 1.0, 12);
    Matrix p = mf::testing::random_projector(rng, 12, 4);
    OnePDM w = OperatorKernel::from_matrix(g, p);
    CHECK(std::abs(purity(w)) < 1e-12);
    CHECK(std::abs(fluctuation_number(w, w)) < 1e-12);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        RealVector lg(12), lw(12);
        for (int i = 0; i < 12; ++i) {
            lg(i) = unit(rng);
            lw(i) = unit(rng);
        }
        lw *= lg.sum() / lw.sum();
        if (lw.maxCoeff() > 1.0)
            continue;
        Matrix ug = mf::testing::random_unitary(rng, 12), uw = mf::testing::random_unitary(rng, 12);
        OnePDM gamma = OperatorKernel::from_matrix(g, ug * lg.cast<cplx>().asDiagonal() * ug.adjoint());
        OnePDM omega = OperatorKernel::from_matrix(g, uw * lw.cast<cplx>().asDiagonal() * uw.adjoint());
        double hs = hs_norm(gamma.matrix() - omega.matrix());
        CHECK(fluctuation_number(gamma, omega) >= hs * hs - 1e-9);
        CHECK(purity(omega) >= 0.0);
    }
}

TEST_CASE("mass outside an inflated region") {
    Grid g = Grid::cube(1, 4.0, 64);
    OnePDM w = slater_from_orbitals(g, {gaussian_orbital(g, {2.0, 0, 0}, 0.1)});
    Region r = Region::box({1.5, 0, 0}, {2.5, 0, 0});
    CHECK(mass_outside(w, r, 0.0) < 1e-10);
    CHECK(mass_outside(w, Region::box({3.0, 0, 0}, {3.5, 0, 0}), 0.1) == doctest::Approx(1.0));
    CHECK(mass_outside(w, Region::full(), 0.0) == 0.0);
}
