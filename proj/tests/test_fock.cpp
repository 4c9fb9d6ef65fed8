#include "doctest.h"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/fock.hpp"
#include "meanfield/states.hpp"
#include "test_support.hpp"

using namespace mf;
using mf::testing::max_abs;

namespace {

Matrix dense(const FockOperator& op) { return Matrix(op); }

FockVector random_fock(std::mt19937_64& rng, int modes) {
    Vector a = mf::testing::random_vector(rng, Eigen::Index{1} << modes);
    return {modes, a / a.norm()};
}

// Singular-value norms of J.
struct Norms {
    double op, hs, tr;
};

Norms singular_norms(const Matrix& j) {
    Eigen::JacobiSVD<Matrix> svd(j);
    const auto& s = svd.singularValues();
    return {s.maxCoeff(), s.norm(), s.sum()};
}

} // namespace

TEST_CASE("canonical anticommutation relations") {
    std::mt19937_64 rng(21);
    const int m = 5;
    const Eigen::Index n = 1 << m;
    for (int trial = 0; trial < 5; ++trial) {
        Vector f = mf::testing::random_vector(rng, m);
        Vector g = mf::testing::random_vector(rng, m);
        Matrix af = dense(annihilate(f)), ag = dense(annihilate(g));
        Matrix cf = dense(create(f)), cg = dense(create(g));
        CHECK(max_abs(af * cg + cg * af - f.dot(g) * Matrix::Identity(n, n)) < 1e-12);
        CHECK(max_abs(af * ag + ag * af) < 1e-12);
        CHECK(max_abs(cf * cg + cg * cf) < 1e-12);
        CHECK(max_abs(cf - af.adjoint()) == 0.0);
    }
    Matrix num = dense(number_operator(m));
    Matrix sum = Matrix::Zero(n, n);
    for (int i = 0; i < m; ++i)
        sum += dense(creation_operator(m, i)) * dense(annihilation_operator(m, i));
    CHECK(max_abs(num - sum) < 1e-14);
    CHECK_THROWS_AS(FockVector::vacuum(kMaxFockModes + 1), CapExceeded);
}

TEST_CASE("quadratic operators against ladder products") {
    std::mt19937_64 rng(22);
    const int m = 4;
    Matrix j = mf::testing::random_matrix(rng, m, m);
    Matrix dg = Matrix::Zero(16, 16), aa = dg, cc = dg;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            Matrix ca = dense(creation_operator(m, a)), cb = dense(creation_operator(m, b));
            Matrix la = dense(annihilation_operator(m, a)), lb = dense(annihilation_operator(m, b));
            dg += j(a, b) * ca * lb;
            aa += j(a, b) * la * lb;
            cc += j(a, b) * ca * cb;
        }
    CHECK(max_abs(dense(second_quantize(j)) - dg) < 1e-12);
    CHECK(max_abs(dense(pair_annihilation(j)) - aa) < 1e-12);
    CHECK(max_abs(dense(pair_creation(j)) - cc) < 1e-12);
}

TEST_CASE("Fock encoding agrees with the subset basis") {
    std::mt19937_64 rng(23);
    Grid g = Grid::cube(1, 1.0, 8);
    Potential v = Potential::gaussian(g, 1.5, 0.2);
    const double eps = 0.3;
    FockHamiltonian hf = FockHamiltonian::on_grid(g, v, eps);
    for (int n = 1; n <= 3; ++n) {
        ManyBodyHamiltonian h(g, n, v, eps);
        SubsetBasis b(8, n);
        Matrix sector(b.size(), b.size());
        Matrix full = dense(hf.matrix);
        for (std::size_t r = 0; r < b.size(); ++r)
            for (std::size_t c = 0; c < b.size(); ++c)
                sector(r, c) = full(b.state(r), b.state(c));
        CHECK(max_abs(sector - h.matrix().dense()) < 1e-12);

        Vector a = mf::testing::random_vector(rng, static_cast<Eigen::Index>(b.size()));
        ManyBodyState psi{g, n, a / a.norm()};
        FockVector f = to_fock(psi);
        CHECK(max_abs(one_pdm(f) - reduce_one_pdm(psi).matrix()) < 1e-12);
        CHECK(number_expectation(f) == doctest::Approx(n));
        CHECK(max_abs(to_many_body(f, g, n).amplitudes - psi.amplitudes) == 0.0);
        CHECK_THROWS_AS(to_many_body(f, g, n == 1 ? 2 : 1), PreconditionError);
    }
    RealVector ev = hermitian_spectrum(dense(hf.matrix));
    CHECK(ev.minCoeff() >= hf.lower - 1e-10);
    CHECK(ev.maxCoeff() <= hf.upper + 1e-10);

    // slater_fock (orthonormal coordinates) matches the subset-basis Slater vector (grid functions)
    std::vector<Vector> orbs{plane_wave(g, 1), plane_wave(g, 2), plane_wave(g, 5)};
    std::vector<Vector> coords;
    for (const auto& f : orbs)
        coords.push_back(f * std::sqrt(g.cell_volume()));
    FockVector s = slater_fock(coords);
    CHECK(max_abs(s.amplitudes - to_fock(slater_many_body(g, orbs)).amplitudes) < 1e-12);
}

TEST_CASE("quadratic operator bounds by operator, Hilbert-Schmidt and trace norms") {
    std::mt19937_64 rng(24);
    const int m = 6;
    Matrix num = dense(number_operator(m));
    const Eigen::Index n = num.rows();
    Vector occ = num.diagonal();
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        FockVector psi = random_fock(rng, m);
        // Alternate between generic and low-rank J so each norm gets exercised near its regime.
        Matrix j = trial % 2 ? mf::testing::random_matrix(rng, m, m)
                             : Matrix(mf::testing::random_matrix(rng, m, 1) *
                                      mf::testing::random_matrix(rng, 1, m));
        Norms nj = singular_norms(j);
        const Vector& x = psi.amplitudes;
        Vector nx = occ.cwiseProduct(x);
        Vector sqrt_nx = occ.cwiseSqrt().cwiseProduct(x);
        Vector sqrt_n1x = (occ.array().real() + 1.0).sqrt().matrix().cast<cplx>().cwiseProduct(x);

        Vector dg = second_quantize(j) * x;
        Vector aa = pair_annihilation(j) * x;
        Vector cc = pair_creation(j) * x;
        const double tol = 1e-10;
        failures += std::abs(x.dot(dg)) > nj.op * x.dot(nx).real() + tol;
        failures += dg.norm() > nj.op * nx.norm() + tol;
        failures += dg.norm() > nj.hs * sqrt_nx.norm() + tol;
        failures += aa.norm() > nj.hs * sqrt_nx.norm() + tol;
        failures += cc.norm() > 2.0 * nj.hs * sqrt_n1x.norm() + tol;
        failures += dg.norm() > 2.0 * nj.tr * x.norm() + tol;
        failures += aa.norm() > 2.0 * nj.tr * x.norm() + tol;
        failures += cc.norm() > 2.0 * nj.tr * x.norm() + tol;
    }
    CHECK(failures == 0);
    CHECK(n == 64);
}

TEST_CASE("particle-hole transformation") {
    std::mt19937_64 rng(25);
    const int m = 6;
    const Eigen::Index n = 1 << m;
    const Matrix id = Matrix::Identity(n, n);
    for (int np = 0; np <= 4; ++np) {
        CAPTURE(np);
        Matrix p = mf::testing::random_projector(rng, m, np);
        BogoliubovMap r(p);
        REQUIRE(r.particles() == np);
        Matrix rm = r.dense();
        CHECK(max_abs(rm.adjoint() * rm - id) < 1e-10);

        // vacuum goes to the Slater vector of the range of p
        FockVector vac = FockVector::vacuum(m);
        FockVector s = r.apply(vac);
        CHECK((s.amplitudes - r.slater().amplitudes).norm() < 1e-10);
        Matrix gamma = one_pdm(s);
        CHECK(max_abs(gamma - p) < 1e-10);

        // conjugation of ladder operators
        for (int k = 0; k < m; ++k) {
            Vector f = r.orbitals().col(k);
            Matrix conj = rm.adjoint() * dense(annihilate(f)) * rm;
            Matrix expect = k < np ? dense(create(f)) : dense(annihilate(f));
            CHECK(max_abs(conj - expect) < 1e-10);
        }

        // adjoint action is the inverse
        FockVector x = random_fock(rng, m);
        CHECK((r.apply_adjoint(r.apply(x)).amplitudes - x.amplitudes).norm() < 1e-10);
        CHECK((r.apply_adjoint(x).amplitudes - rm.adjoint() * x.amplitudes).norm() < 1e-10);

        // R^2 = (-1)^{N(N-1)/2} when R Omega is the Slater vector
        double sigma = (np * (np - 1) / 2) % 2 ? -1.0 : 1.0;
        CHECK(max_abs(rm * rm - sigma * id) < 1e-10);

        BogoliubovMap ri(p, BogoliubovPhase::involution);
        Matrix im = ri.dense();
        CHECK(max_abs(im - im.adjoint()) < 1e-10);
        CHECK(max_abs(im * im - id) < 1e-10);
        cplx theta = r.slater().amplitudes.dot(ri.apply(vac).amplitudes);
        CHECK(std::abs(theta - (sigma > 0 ? cplx(1.0) : cplx(0.0, 1.0))) < 1e-10);
    }

    Matrix bad = Matrix::Identity(4, 4) * 0.5;
    CHECK_THROWS_AS(BogoliubovMap{bad}, PreconditionError);
}

TEST_CASE("fluctuation number identity along a mean-field trajectory") {
    Grid g = Grid::cube(1, 1.0, 8);
    Potential v = Potential::gaussian(g, 2.0, 0.2);
    const double eps = 1.0 / 3.0;
    const int np = 3;
    PropagatorConfig cfg;
    cfg.epsilon = eps;
    cfg.dt = 0.01;
    OnePDM omega0 = to_position(free_fermi_gas_with_particles(g, np));
    Trajectory traj = evolve(omega0, v, cfg, 0.3, 10);
    std::vector<Matrix> omegas;
    for (const auto& w : traj.states)
        omegas.push_back(w.matrix());
    FockHamiltonian h = FockHamiltonian::on_grid(g, v, eps);

    // vacuum fluctuation and a particle-hole pair a*(f_4) a*(f_1) Omega
    BogoliubovMap r0(omegas.front());
    FockVector vac = FockVector::vacuum(8);
    FockVector pair = apply_operator(create(r0.orbitals().col(np)),
                                     apply_operator(create(r0.orbitals().col(0)), vac));
    const std::vector<std::pair<FockVector, double>> starts{{vac, 0.0}, {pair, 2.0}};
    for (const auto& [xi0, n0] : starts) {
        auto samples = fluctuation_dynamics(xi0, omegas, h, traj.times, eps);
        REQUIRE(samples.size() == traj.times.size());
        for (const auto& s : samples)
            CHECK(s.number == doctest::Approx(s.fluctuation_number).epsilon(1e-8).scale(1.0));
        CHECK(samples.front().number == doctest::Approx(n0).scale(1.0));
    }
}

TEST_CASE("ladder operator identities on vectors") {
    std::mt19937_64 rng(26);
    const int m = 6;
    FockVector vac = FockVector::vacuum(m);
    CHECK(apply_operator(annihilation_operator(m, 2), vac).norm() == 0.0);
    FockVector a = apply_operator(creation_operator(m, 0), apply_operator(creation_operator(m, 1), vac));
    FockVector b = apply_operator(creation_operator(m, 1), apply_operator(creation_operator(m, 0), vac));
    CHECK(max_abs(a.amplitudes + b.amplitudes) == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        Vector f = mf::testing::random_vector(rng, m);
        FockVector psi = random_fock(rng, m);
        double lhs = apply_operator(create(f), psi).amplitudes.squaredNorm() +
                     apply_operator(annihilate(f), psi).amplitudes.squaredNorm();
        CHECK(lhs == doctest::Approx(f.squaredNorm()));
        CHECK(singular_values(dense(annihilate(f)))(0) <= f.norm() * (1 + 1e-12));

        Matrix j = mf::testing::random_matrix(rng, m, m);
        cplx expect = (j * one_pdm(psi)).trace();
        cplx got = psi.amplitudes.dot(second_quantize(j) * psi.amplitudes);
        CHECK(std::abs(expect - got) < 1e-10);
    }
    CHECK(max_abs(dense(second_quantize(Matrix::Identity(m, m))) - dense(number_operator(m))) == 0.0);
}

TEST_CASE("particle-hole transformation edge ranks") {
    const int m = 5;
    BogoliubovMap empty(Matrix::Zero(m, m));
    CHECK(max_abs(empty.dense() - Matrix::Identity(32, 32)) == 0.0);

    Matrix full = Matrix::Identity(m, m);
    BogoliubovMap r(full);
    FockVector out = r.apply(FockVector::vacuum(m));
    CHECK(std::abs(out.amplitudes(31)) == doctest::Approx(1.0));
    CHECK(number_expectation(out) == doctest::Approx(m));

    CHECK_THROWS_AS(fluctuation_dynamics(FockVector::vacuum(4), {Matrix::Zero(5, 5)},
                                         FockHamiltonian::build(Matrix::Zero(4, 4),
                                                                Eigen::MatrixXd::Zero(4, 4), 1.0),
                                         {0.0}, 0.5),
                    PreconditionError);
}
