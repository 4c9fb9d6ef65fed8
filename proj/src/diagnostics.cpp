#include "meanfield/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meanfield/errors.hpp"
#include "meanfield/states.hpp"

namespace mf {

namespace {

Matrix hermitian_position(const OnePDM& omega) {
    Matrix w = to_position(omega).matrix();
    return 0.5 * (w + w.adjoint());
}

// Row scaling diag(w) * A.
Matrix scale_rows(const RealVector& w, const Matrix& a) {
    return w.cast<cplx>().asDiagonal() * a;
}

// U^* K U for the free propagator U at time t (identity at t = 0).
Matrix free_pullback(const Fourier& f, const Matrix& k, double t, double epsilon, Dispersion d) {
    if (t == 0.0)
        return k;
    return f.conjugate_by_multiplier(k, free_phase(f.grid(), t, epsilon, d).conjugate());
}

} // namespace

RealVector localization_profile(const Grid& grid, const Point& z, int n) {
    if (n < 1)
        throw PreconditionError("localization power n must be >= 1");
    RealVector w(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t s = 0; s < grid.size(); ++s) {
        double r = grid.distance(grid.position(s), z);
        w(static_cast<Eigen::Index>(s)) = 1.0 / (1.0 + std::pow(r, 4 * n));
    }
    return w;
}

Vector free_phase(const Grid& grid, double t, double epsilon, Dispersion dispersion) {
    RealVector sym = kinetic_symbol(grid, epsilon, dispersion);
    Vector phase(sym.size());
    for (Eigen::Index s = 0; s < sym.size(); ++s)
        phase(s) = std::polar(1.0, t * sym(s) / epsilon);
    return phase;
}

LocalizationOperator localization_operator(const Grid& grid, const Point& z, int n, double t,
                                           double epsilon, Dispersion dispersion) {
    Matrix w = localization_profile(grid, z, n).cast<cplx>().asDiagonal();
    if (t != 0.0) {
        Fourier f(grid);
        w = f.conjugate_by_multiplier(w, free_phase(grid, t, epsilon, dispersion));
        w = 0.5 * (w + w.adjoint());
    }
    return {z, n, t, epsilon, OperatorKernel::from_matrix(grid, std::move(w))};
}

DomainWeight DomainWeight::build(const Grid& grid, const Region& region) {
    DomainWeight d{region, RealVector(static_cast<Eigen::Index>(grid.size()))};
    for (std::size_t s = 0; s < grid.size(); ++s)
        d.values(static_cast<Eigen::Index>(s)) = 1.0 + std::pow(region.distance(grid, grid.position(s)), 4);
    return d;
}

std::vector<std::size_t> momenta_within(const Grid& grid, double radius) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < grid.size(); ++s)
        if (grid.momentum_norm(s) <= radius * (1.0 + 1e-12))
            out.push_back(s);
    return out;
}

std::vector<std::size_t> strided_sites(const Grid& grid, int stride) {
    if (stride < 1)
        throw PreconditionError("z stride must be >= 1");
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < grid.size(); ++s) {
        auto idx = grid.unravel(s);
        bool keep = true;
        for (int a = 0; a < grid.dim(); ++a)
            keep = keep && idx[a] % stride == 0;
        if (keep)
            out.push_back(s);
    }
    return out;
}

SemiclassicalReport semiclassical_report(const OnePDM& omega, const SemiclassicalParams& params) {
    const Grid& grid = omega.grid();
    const int d = grid.dim();
    const double eps = params.epsilon;
    if (!(eps > 0))
        throw PreconditionError("semiclassical_report: epsilon must be positive");
    SemiclassicalReport rep;
    rep.n = params.n;
    rep.epsilon = eps;
    rep.times = params.times;
    rep.z_sites = strided_sites(grid, params.z_stride);
    rep.p_sites = params.p_sites.empty() ? momenta_within(grid, 1.0 / eps) : params.p_sites;
    rep.weighted = !params.lambda.whole;
    if (rep.times.empty() || rep.z_sites.empty() || rep.p_sites.empty())
        throw PreconditionError("semiclassical_report: empty sample set");
    for (std::size_t p : rep.p_sites)
        if (p >= grid.size() || grid.momentum_norm(p) > (1.0 + 1e-12) / eps) {
            std::ostringstream os;
            os << "semiclassical_report: sampled momentum at dual site " << p << " exceeds 1/eps";
            throw PreconditionError(os.str());
        }

    const Matrix w = hermitian_position(omega);
    const Fourier fourier(grid);
    const DomainWeight weight = DomainWeight::build(grid, params.lambda);

    // Commutators in the position representation, independent of (z, t).
    std::vector<Matrix> comm_p;
    std::vector<double> p_factor;
    for (std::size_t p : rep.p_sites) {
        Point q = grid.momentum(p);
        Vector e(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t s = 0; s < grid.size(); ++s) {
            Point x = grid.position(s);
            double phase = 0.0;
            for (int a = 0; a < d; ++a)
                phase += q[a] * x[a];
            e(static_cast<Eigen::Index>(s)) = std::polar(1.0, phase);
        }
        comm_p.push_back(e.asDiagonal() * w - w * e.asDiagonal());
        p_factor.push_back(1.0 / (1.0 + grid.momentum_norm(p)));
    }
    std::vector<Matrix> comm_grad;
    for (int a = 0; a < d; ++a) {
        Vector mult(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t s = 0; s < grid.size(); ++s)
            mult(static_cast<Eigen::Index>(s)) = cplx(0.0, eps * grid.momentum(s)[a]);
        Matrix gw = fourier.apply_multiplier(w, mult);
        // G = eps grad is anti-Hermitian and omega Hermitian, so omega G = -(G omega)^*.
        comm_grad.push_back(gw + gw.adjoint());
    }

    for (double t : rep.times) {
        const Matrix wt = free_pullback(fourier, w, t, eps, params.dispersion);
        std::vector<Matrix> cp, cg;
        for (const Matrix& c : comm_p)
            cp.push_back(free_pullback(fourier, c, t, eps, params.dispersion));
        for (const Matrix& c : comm_grad)
            cg.push_back(free_pullback(fourier, c, t, eps, params.dispersion));
        const RealVector diag = wt.diagonal().real();

        for (std::size_t z : rep.z_sites) {
            const Point zp = grid.position(z);
            const double x = weight.values(static_cast<Eigen::Index>(z));
            const RealVector wz = localization_profile(grid, zp, params.n);
            for (std::size_t k = 0; k < cp.size(); ++k)
                rep.comm_functional =
                    std::max(rep.comm_functional, x * p_factor[k] * trace_norm(scale_rows(wz, cp[k])));
            double g = 0.0;
            for (const Matrix& c : cg)
                g += trace_norm(scale_rows(wz, c));
            rep.grad_functional = std::max(rep.grad_functional, x * g);
            rep.mass_functional = std::max(rep.mass_functional, x * trace_norm(scale_rows(wz, wt)));
            const RealVector w1 = localization_profile(grid, zp, 1);
            rep.concentration = std::max(rep.concentration, w1.dot(diag));
        }
    }
    rep.comm_scaled = rep.comm_functional * std::pow(eps, d - 1);
    rep.grad_scaled = rep.grad_functional * std::pow(eps, d - 1);
    rep.mass_scaled = rep.mass_functional * std::pow(eps, d);
    rep.concentration_scaled = rep.concentration * std::pow(eps, d);
    return rep;
}

double plane_wave_commutator_norm(const OnePDM& omega, std::size_t p_site) {
    const Grid& grid = omega.grid();
    if (p_site >= grid.size())
        throw PreconditionError("plane_wave_commutator_norm: momentum site out of range");
    const Matrix w = to_position(omega).matrix();
    Point q = grid.momentum(p_site);
    Vector e(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t s = 0; s < grid.size(); ++s) {
        Point x = grid.position(s);
        double phase = 0.0;
        for (int a = 0; a < grid.dim(); ++a)
            phase += q[a] * x[a];
        e(static_cast<Eigen::Index>(s)) = std::polar(1.0, phase);
    }
    return trace_norm(e.asDiagonal() * w - w * e.asDiagonal());
}

double commutator_with_function(const OnePDM& omega, const Potential& f, std::size_t z_site) {
    if (f.grid() != omega.grid())
        throw PreconditionError("commutator_with_function: grids differ");
    const Matrix w = to_position(omega).matrix();
    Vector fz = f.centered_at(z_site).cast<cplx>();
    return trace_norm(w * fz.asDiagonal() - fz.asDiagonal() * w);
}

double concentration(const OnePDM& omega, double t, double epsilon, int z_stride,
                     Dispersion dispersion) {
    const Grid& grid = omega.grid();
    Matrix w = hermitian_position(omega);
    if (dispersion == Dispersion::nonrelativistic)
        w = free_pullback(Fourier(grid), w, t, epsilon, dispersion);
    const RealVector diag = w.diagonal().real();
    double best = 0.0;
    for (std::size_t z : strided_sites(grid, z_stride))
        best = std::max(best, localization_profile(grid, grid.position(z), 1).dot(diag));
    return best;
}

double envelope_constant(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size())
        throw PreconditionError("envelope_constant: size mismatch");
    double best = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < 0)
            throw PreconditionError("envelope_constant: times must be nonnegative");
        if (!(y[k] > 0))
            continue;
        // C exp(C t) is increasing in C; bisect for equality.
        double lo = 0.0, hi = std::max(1.0, y[k]);
        while (hi * std::exp(hi * t[k]) < y[k])
            hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (mid * std::exp(mid * t[k]) < y[k] ? lo : hi) = mid;
        }
        best = std::max(best, hi);
    }
    return best;
}

ConcentrationSeries concentration_series(const Trajectory& traj, double epsilon, int z_stride,
                                         Dispersion dispersion) {
    ConcentrationSeries out;
    if (traj.states.empty())
        return out;
    const int d = traj.states.front().grid().dim();
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        double v = concentration(traj.states[k], traj.times[k], epsilon, z_stride, dispersion);
        out.times.push_back(traj.times[k]);
        out.values.push_back(v);
        out.scaled.push_back(v * std::pow(epsilon, d));
        if (out.t_star < 0 && v > 2.0 * out.values.front())
            out.t_star = traj.times[k];
    }
    out.envelope_constant = envelope_constant(out.times, out.scaled);
    return out;
}

TransportRatio localization_transport_ratio(const OnePDM& omega0, const Potential& v,
                                            const PropagatorConfig& cfg_in, const TransportProbe& probe) {
    const Grid& grid = omega0.grid();
    const int d = grid.dim();
    PropagatorConfig cfg = cfg_in;
    cfg.exchange = false;
    cfg.validate();
    if (!(cfg.dt > 0) || probe.s < 0 || probe.t < probe.s)
        throw PreconditionError("transport ratio needs dt > 0 and 0 <= s <= t");
    if (probe.probes < 1)
        throw PreconditionError("transport ratio needs at least one probe");
    const double eps = cfg.epsilon;
    const int pre_steps = step_count(probe.s, cfg.dt);
    const int steps = step_count(probe.t - probe.s, cfg.dt);
    const auto n = static_cast<Eigen::Index>(grid.size());

    // Random Gaussian wave packets of width sqrt(eps), momenta within the Fermi scale.
    std::mt19937_64 rng(probe.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix phi(n, probe.probes + n);
    for (int j = 0; j < probe.probes; ++j) {
        Point c{0.0, 0.0, 0.0}, k{0.0, 0.0, 0.0};
        for (int a = 0; a < d; ++a) {
            c[a] = unit(rng) * grid.box_length(a);
            k[a] = (2.0 * unit(rng) - 1.0) / eps;
        }
        Vector g = gaussian_orbital(grid, c, std::sqrt(eps), k);
        phi.col(j) = g / g.norm();
    }
    // The identity block yields the full propagator for the exact supremum.
    phi.rightCols(n) = Matrix::Identity(n, n);

    HartreePropagator prop(grid, v, cfg);
    Matrix w = to_position(omega0).matrix();
    for (int k = 0; k < pre_steps; ++k)
        w = prop.step(w);

    RealVector sym = kinetic_symbol(grid, eps, cfg.dispersion);
    Vector half(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        Point q = grid.momentum(static_cast<std::size_t>(s));
        double pk = 0.0;
        for (int a = 0; a < d; ++a)
            pk += probe.p[a] * q[a];
        half(s) = std::polar(1.0, -0.5 * cfg.dt / eps * (sym(s) - eps * eps * pk));
    }
    const Fourier fourier(grid);
    Matrix psi = phi;
    for (int k = 0; k < steps; ++k) {
        w = prop.step(w);
        const RealVector& field = prop.last_mean_field();
        psi = fourier.apply_multiplier(psi, half);
        for (Eigen::Index s = 0; s < n; ++s)
            psi.row(s) *= std::polar(1.0, -cfg.dt / eps * field(s));
        psi = fourier.apply_multiplier(psi, half);
    }

    const Matrix a = localization_operator(grid, probe.z, probe.n, probe.t0, eps).kernel.matrix();
    Point shifted = probe.z;
    for (int ax = 0; ax < d; ++ax)
        shifted[ax] += eps * probe.p[ax] * (probe.t - probe.s);
    const Matrix b =
        localization_operator(grid, shifted, probe.n, probe.t0 + probe.t - probe.s, eps).kernel.matrix();

    TransportRatio out;
    out.probes = probe.probes;
    for (int j = 0; j < probe.probes; ++j) {
        double num = psi.col(j).dot(a * psi.col(j)).real();
        double den = phi.col(j).dot(b * phi.col(j)).real();
        out.probe_ratio = std::max(out.probe_ratio, num / den);
    }
    const Matrix u = psi.rightCols(n);
    Matrix pulled = u.adjoint() * a * u;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(0.5 * (pulled + pulled.adjoint()),
                                                         0.5 * (b + b.adjoint()),
                                                         Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    out.exact_ratio = ges.eigenvalues().maxCoeff();
    return out;
}

double purity(const OnePDM& omega) {
    const Matrix w = omega.matrix();
    return (w - w * w).trace().real();
}

double fluctuation_number(const OnePDM& gamma, const OnePDM& omega) {
    if (gamma.grid() != omega.grid())
        throw PreconditionError("fluctuation_number: grids differ");
    const Matrix g = to_position(gamma).matrix();
    const Matrix w = to_position(omega).matrix();
    return 2.0 * (g - g * w).trace().real();
}

double mass_outside(const OnePDM& omega, const Region& region, double margin) {
    if (region.whole)
        return 0.0;
    const Grid& grid = omega.grid();
    const Matrix w = to_position(omega).matrix();
    double m = 0.0;
    for (std::size_t s = 0; s < grid.size(); ++s)
        if (region.distance(grid, grid.position(s)) > margin)
            m += w(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)).real();
    return m;
}

} // namespace mf
