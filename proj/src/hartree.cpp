#include "meanfield/hartree.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meanfield/errors.hpp"

namespace mf {

Dispersion parse_dispersion(const std::string& name) {
    if (name == "nonrelativistic")
        return Dispersion::nonrelativistic;
    if (name == "pseudo_relativistic" || name == "relativistic")
        return Dispersion::pseudo_relativistic;
    throw ConfigError("unknown dispersion '" + name + "'");
}

std::string to_string(Dispersion d) {
    return d == Dispersion::nonrelativistic ? "nonrelativistic" : "pseudo_relativistic";
}

double PropagatorConfig::coupling(const Grid& grid) const {
    int p = coupling_power < 0 ? grid.dim() : coupling_power;
    return std::pow(epsilon, p);
}

void PropagatorConfig::validate() const {
    if (!(epsilon > 0) || !std::isfinite(epsilon))
        throw PreconditionError("propagator: epsilon must be positive");
    if (dt == 0.0 || !std::isfinite(dt))
        throw PreconditionError("propagator: dt must be nonzero and finite");
    if (self_consistency_iters < 0)
        throw PreconditionError("propagator: self_consistency_iters must be >= 0");
}

RealVector kinetic_symbol(const Grid& grid, double epsilon, Dispersion dispersion) {
    auto n = static_cast<Eigen::Index>(grid.size());
    RealVector t(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        double k = grid.momentum_norm(static_cast<std::size_t>(s));
        double e2k2 = epsilon * epsilon * k * k;
        t(s) = dispersion == Dispersion::nonrelativistic ? e2k2 : std::sqrt(1.0 + e2k2);
    }
    return t;
}

Matrix one_body_matrix(const Grid& grid, double epsilon, Dispersion dispersion) {
    Fourier f(grid);
    Matrix diag = kinetic_symbol(grid, epsilon, dispersion).cast<cplx>().asDiagonal();
    Matrix t = f.conjugate_inverse(diag);
    return 0.5 * (t + t.adjoint());
}

RealVector mean_field(const Matrix& omega, const Potential& v, double coupling) {
    const Grid& grid = v.grid();
    RealVector density = omega.diagonal().real() * (coupling / grid.cell_volume());
    RealVector w = v.convolve(density);
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!std::isfinite(w(i))) {
            std::ostringstream os;
            os << "mean field is not finite at grid site " << i;
            throw NumericalError(os.str());
        }
    return w;
}

Matrix exchange_matrix(const Matrix& omega, const Potential& v, double coupling) {
    Eigen::MatrixXd table = v.pair_table();
    return (omega.array() * table.cast<cplx>().array()).matrix() * coupling;
}

HartreePropagator::HartreePropagator(Grid grid, Potential v, PropagatorConfig cfg)
    : grid_(std::move(grid)), v_(std::move(v)), cfg_(cfg), fourier_(grid_) {
    cfg_.validate();
    if (v_.grid() != grid_)
        throw PreconditionError("potential and state live on different grids");
    RealVector t = kinetic_symbol(grid_, cfg_.epsilon, cfg_.dispersion);
    half_phase_.resize(t.size());
    double tau = 0.5 * cfg_.dt / cfg_.epsilon;
    for (Eigen::Index s = 0; s < t.size(); ++s)
        half_phase_(s) = std::polar(1.0, -tau * t(s));
    coupling_ = cfg_.coupling(grid_);
}

namespace {

Matrix hermitian_exponential(const Matrix& k, double tau) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (k + k.adjoint()));
    Vector phase(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < phase.size(); ++i)
        phase(i) = std::polar(1.0, -tau * es.eigenvalues()(i));
    return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace

Matrix HartreePropagator::step(const Matrix& omega) const {
    require_finite(omega, "hartree step input");
    Matrix half = fourier_.conjugate_by_multiplier(omega, half_phase_);
    const double tau = cfg_.dt / cfg_.epsilon;
    Matrix kicked;
    if (!cfg_.exchange) {
        last_field_ = mean_field(half, v_, coupling_);
        Vector d(last_field_.size());
        for (Eigen::Index i = 0; i < d.size(); ++i)
            d(i) = std::polar(1.0, -tau * last_field_(i));
        kicked = d.asDiagonal() * half * d.conjugate().asDiagonal();
    } else {
        kicked = half;
        for (int it = 0; it <= cfg_.self_consistency_iters; ++it) {
            Matrix mid = it == 0 ? half : Matrix(0.5 * (half + kicked));
            last_field_ = mean_field(mid, v_, coupling_);
            Matrix gen = Matrix(last_field_.cast<cplx>().asDiagonal()) -
                         exchange_matrix(mid, v_, coupling_);
            Matrix u = hermitian_exponential(gen, tau);
            kicked = u * half * u.adjoint();
        }
    }
    Matrix out = fourier_.conjugate_by_multiplier(kicked, half_phase_);
    require_finite(out, "hartree step output");
    return out;
}

OnePDM HartreePropagator::step(const OnePDM& omega) const {
    if (omega.grid() != grid_)
        throw PreconditionError("state and propagator live on different grids");
    OnePDM pos = to_position(omega);
    return OperatorKernel::from_matrix(grid_, step(pos.matrix()));
}

OnePDM hartree_step(const OnePDM& omega, const Potential& v, PropagatorConfig cfg) {
    cfg.dispersion = Dispersion::nonrelativistic;
    cfg.exchange = false;
    return HartreePropagator(omega.grid(), v, cfg).step(omega);
}

OnePDM relativistic_step(const OnePDM& omega, const Potential& v, PropagatorConfig cfg) {
    cfg.dispersion = Dispersion::pseudo_relativistic;
    return HartreePropagator(omega.grid(), v, cfg).step(omega);
}

OnePDM hartree_fock_step(const OnePDM& omega, const Potential& v, PropagatorConfig cfg) {
    cfg.exchange = true;
    return HartreePropagator(omega.grid(), v, cfg).step(omega);
}

int step_count(double t_final, double dt) {
    if (t_final == 0.0)
        return 0;
    double r = t_final / dt;
    double n = std::round(r);
    if (n < 0 || std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r))) {
        std::ostringstream os;
        os << "t_final = " << t_final << " is not a nonnegative multiple of dt = " << dt;
        throw PreconditionError(os.str());
    }
    return static_cast<int>(n);
}

Trajectory evolve(const OnePDM& omega0, const Potential& v, const PropagatorConfig& cfg,
                  double t_final, int stride, const StepCallback& callback) {
    if (stride < 1)
        throw PreconditionError("evolve: stride must be >= 1");
    const int steps = step_count(t_final, cfg.dt);
    HartreePropagator prop(omega0.grid(), v, cfg);
    Trajectory traj;
    OnePDM current = to_position(omega0);
    auto record = [&](int k) {
        double t = k * cfg.dt;
        traj.times.push_back(t);
        traj.states.push_back(current);
        if (callback)
            callback(t, current);
    };
    record(0);
    Matrix m = current.matrix();
    for (int k = 1; k <= steps; ++k) {
        m = prop.step(m);
        if (k % stride == 0 || k == steps) {
            current = OperatorKernel::from_matrix(omega0.grid(), m);
            record(k);
        }
    }
    return traj;
}

double hartree_energy(const OnePDM& omega, const Potential& v, const PropagatorConfig& cfg) {
    const Grid& grid = omega.grid();
    OnePDM mom = to_momentum(omega);
    RealVector t = kinetic_symbol(grid, cfg.epsilon, cfg.dispersion);
    double kinetic = (mom.matrix().diagonal().real().array() * t.array()).sum();
    OnePDM pos = to_position(omega);
    RealVector occ = pos.matrix().diagonal().real();
    // V * (n / h) scaled back by h gives sum_y V(x - y) n_y.
    RealVector field = v.convolve(occ / grid.cell_volume());
    double interaction = 0.5 * cfg.coupling(grid) * occ.dot(field);
    return kinetic + interaction;
}

Point total_momentum(const OnePDM& omega, double epsilon) {
    const Grid& grid = omega.grid();
    OnePDM mom = to_momentum(omega);
    Point p{0.0, 0.0, 0.0};
    for (std::size_t s = 0; s < grid.size(); ++s) {
        double occ = mom.matrix()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)).real();
        Point q = grid.momentum(s);
        for (int a = 0; a < grid.dim(); ++a)
            p[a] += epsilon * q[a] * occ;
    }
    return p;
}

} // namespace mf
