#include "doctest.h"

#include <cmath>
#include <numbers>

#include "meanfield/errors.hpp"
#include "meanfield/kernel.hpp"
#include "test_support.hpp"

using namespace mf;
using mf::testing::max_abs;

TEST_CASE("grid geometry") {
    Grid g = Grid::cube(2, 2.0, 8);
    CHECK(g.size() == 64);
    CHECK(g.spacing(0) == doctest::Approx(0.25));
    CHECK(g.cell_volume() == doctest::Approx(0.0625));
    // row-major, first axis slowest
    auto idx = g.unravel(9);
    CHECK(idx[0] == 1);
    CHECK(idx[1] == 1);
    CHECK(g.ravel({-1, 9, 0}) == g.ravel({7, 1, 0}));
    // FFT order: second half negative, one unpaired -M/2
    Grid g1 = Grid::cube(1, 1.0, 8);
    CHECK(g1.mode(3)[0] == 3);
    CHECK(g1.mode(4)[0] == -4);
    CHECK(g1.mode(7)[0] == -1);
    CHECK(g1.momentum(1)[0] == doctest::Approx(2 * std::numbers::pi));
    CHECK(g1.distance({0.05, 0, 0}, {0.95, 0, 0}) == doctest::Approx(0.1));
    CHECK_THROWS_AS(Grid::cube(1, 1.0, 7), PreconditionError);
    CHECK_THROWS_AS(Grid::cube(4, 1.0, 8), PreconditionError);
}

TEST_CASE("region distance is periodic and zero inside") {
    Grid g = Grid::cube(1, 4.0, 16);
    Region r = Region::box({1.0, 0, 0}, {2.0, 0, 0});
    CHECK(r.distance(g, {1.5, 0, 0}) == 0.0);
    CHECK(r.distance(g, {2.5, 0, 0}) == doctest::Approx(0.5));
    CHECK(r.distance(g, {3.75, 0, 0}) == doctest::Approx(1.25)); // via wrap to 1.0
    CHECK(Region::full().distance(g, {3.0, 0, 0}) == 0.0);
}

TEST_CASE("momentum transform round trip and identity") {
    std::mt19937_64 rng(1);
    for (int dim : {1, 2}) {
        Grid g = Grid::cube(dim, 1.5, dim == 1 ? 16 : 4);
        auto n = static_cast<Eigen::Index>(g.size());
        OperatorKernel k = OperatorKernel::from_matrix(g, mf::testing::random_hermitian(rng, n));
        OperatorKernel back = to_position(to_momentum(k));
        CHECK(max_abs(back.matrix() - k.matrix()) < 1e-12);

        OperatorKernel id = to_momentum(OperatorKernel::identity(g));
        CHECK(max_abs(id.matrix() - Matrix::Identity(n, n)) < 1e-12);

        NormReport a = norms(k), b = norms(to_momentum(k));
        CHECK(std::abs(a.trace_norm - b.trace_norm) < 1e-10);
        CHECK(std::abs(a.hs_norm - b.hs_norm) < 1e-10);
        CHECK(std::abs(a.op_norm - b.op_norm) < 1e-10);

        RealVector sa = singular_values(k.matrix()), sb = singular_values(to_momentum(k).matrix());
        CHECK((sa - sb).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("plane-wave multiplication is a momentum shift") {
    Grid g = Grid::cube(1, 1.0, 16);
    std::size_t p = 3;
    Vector f(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        f(static_cast<Eigen::Index>(i)) = std::polar(1.0, g.momentum(p)[0] * g.position(i)[0]);
    OperatorKernel mult = apply_function_of_position(OperatorKernel::identity(g), f, Side::left);
    Matrix m = to_momentum(mult).matrix();
    for (std::size_t q = 0; q < g.size(); ++q) {
        std::size_t target = g.shifted_mode(q, p);
        CHECK(std::abs(m(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(q)) - 1.0) < 1e-12);
    }
    CHECK(std::abs(m.cwiseAbs().sum() - 16.0) < 1e-10);
}

TEST_CASE("norms of projectors") {
    std::mt19937_64 rng(2);
    Grid g = Grid::cube(1, 1.0, 16);
    for (int rank : {1, 4}) {
        NormReport r = norms(mf::testing::random_projector(rng, 16, rank));
        CHECK(r.trace_norm == doctest::Approx(rank).epsilon(1e-10));
        CHECK(r.hs_norm == doctest::Approx(std::sqrt(rank)).epsilon(1e-10));
        CHECK(r.op_norm == doctest::Approx(1.0).epsilon(1e-10));
    }
    // commuting momentum projectors: symmetric difference of s modes has trace norm s
    Vector a = Vector::Zero(16), b = Vector::Zero(16);
    for (int i : {0, 1, 2, 3, 15})
        a(i) = 1.0;
    for (int i : {0, 1, 5, 14})
        b(i) = 1.0;
    Matrix pa = a.asDiagonal(), pb = b.asDiagonal();
    OperatorKernel d = to_position(OperatorKernel::from_matrix(g, pa - pb, Representation::momentum));
    CHECK(trace_norm(d.matrix()) == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("norm ordering on random operators") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        NormReport r = norms(mf::testing::random_matrix(rng, 12, 12));
        CHECK(r.op_norm <= r.hs_norm + 1e-12);
        CHECK(r.hs_norm <= r.trace_norm + 1e-12);
        CHECK(r.op_norm >= 0.0);
    }
}

TEST_CASE("quadrature convention") {
    Grid g = Grid::cube(2, 2.0, 4);
    auto n = static_cast<Eigen::Index>(g.size());
    Matrix entries = Matrix::Zero(n, n);
    entries.diagonal().setConstant(3.0);
    OperatorKernel k(g, entries);
    CHECK(std::abs(k.trace() - cplx(3.0 * g.cell_volume() * n)) < 1e-12);
    CHECK(max_abs(k.entries() - entries) < 1e-12);

    // F = 1 leaves K unchanged; the half-box indicator projects onto half the sites
    std::mt19937_64 rng(4);
    Vector ones = Vector::Ones(n);
    OperatorKernel kk = OperatorKernel::from_matrix(g, mf::testing::random_matrix(rng, n, n));
    CHECK(max_abs(apply_function_of_position(kk, ones, Side::right).matrix() - kk.matrix()) == 0.0);
    Vector half = Vector::Zero(n);
    for (std::size_t s = 0; s < g.size(); ++s)
        if (g.position(s)[0] < 1.0)
            half(static_cast<Eigen::Index>(s)) = 1.0;
    OperatorKernel p = apply_function_of_position(OperatorKernel::identity(g), half, Side::left);
    CHECK(p.trace().real() == doctest::Approx(n / 2));
    CHECK(max_abs(p.matrix() * p.matrix() - p.matrix()) < 1e-14);

    // trace of a multiplication operator is h^d sum F
    Vector f(n);
    for (Eigen::Index i = 0; i < n; ++i)
        f(i) = std::sin(0.3 * static_cast<double>(i)) + 2.0;
    OperatorKernel mult = OperatorKernel(g, Matrix(f.asDiagonal()));
    CHECK(std::abs(mult.trace() - f.sum() * g.cell_volume()) < 1e-13);
}

TEST_CASE("non-finite entries are rejected") {
    Matrix m = Matrix::Identity(4, 4);
    m(2, 1) = cplx(std::nan(""), 0.0);
    CHECK_THROWS_AS(norms(m), NumericalError);
}

TEST_CASE("monotonicity of the trace norm") {
    std::mt19937_64 rng(5);
    Matrix b = mf::testing::random_matrix(rng, 8, 8);
    Matrix c = mf::testing::random_matrix(rng, 8, 8);
    CHECK(monotonicity_check(b, b, c));
    CHECK(monotonicity_check(Matrix(0.5 * b), b, c));
    // |A|^2 <= |B|^2 fails for A = 2B
    CHECK_THROWS_AS(monotonicity_check(Matrix(2.0 * b), b, c), PreconditionError);

    for (int trial = 0; trial < 200; ++trial) {
        Matrix bb = mf::testing::random_matrix(rng, 8, 8);
        Matrix k = mf::testing::random_matrix(rng, 8, 8);
        k /= norms(k).op_norm * 1.0000001; // contraction
        Matrix cc = mf::testing::random_matrix(rng, 8, 8);
        CHECK(monotonicity_check(Matrix(k * bb), bb, cc));
    }
}
