#include "meanfield/states.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meanfield/errors.hpp"

namespace mf {

namespace {

constexpr double kPi = std::numbers::pi;

Vector to_coefficients(const Grid& grid, const Vector& f) {
    return f * std::sqrt(grid.cell_volume());
}

Vector from_coefficients(const Grid& grid, const Vector& c) {
    return c / std::sqrt(grid.cell_volume());
}

} // namespace

double unit_ball_volume(int dim) {
    switch (dim) {
    case 1:
        return 2.0;
    case 2:
        return kPi;
    case 3:
        return 4.0 * kPi / 3.0;
    default:
        throw PreconditionError("dimension must be 1, 2 or 3");
    }
}

double fermi_constant(int dim) {
    return std::pow(std::pow(2.0 * kPi, dim) / unit_ball_volume(dim), 1.0 / dim);
}

DensityProfile DensityProfile::uniform(const Grid& grid, double density) {
    if (density < 0)
        throw PreconditionError("density must be nonnegative");
    DensityProfile p{grid, RealVector::Constant(static_cast<Eigen::Index>(grid.size()), density),
                     Region::full()};
    return p;
}

DensityProfile DensityProfile::plateau(const Grid& grid, const Region& region, double peak,
                                       double ramp_width) {
    if (peak < 0 || ramp_width < 0)
        throw PreconditionError("plateau: peak and ramp width must be nonnegative");
    DensityProfile p{grid, RealVector::Zero(static_cast<Eigen::Index>(grid.size())), region};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double d = region.distance(grid, grid.position(i));
        double v = 0.0;
        if (d == 0.0)
            v = peak;
        else if (d < ramp_width) {
            double c = std::cos(0.5 * kPi * d / ramp_width);
            v = peak * c * c;
        }
        p.rho(static_cast<Eigen::Index>(i)) = v;
    }
    return p;
}

DensityProfile DensityProfile::normalized_to(double n) const {
    double total = total_particles();
    if (total <= 0.0) {
        if (n == 0.0)
            return *this;
        throw PreconditionError("cannot normalize an empty density profile");
    }
    DensityProfile p = *this;
    p.rho *= n / total;
    return p;
}

void DensityProfile::record_bounds(double epsilon) {
    int d = grid.dim();
    density_bound = rho.maxCoeff() * std::pow(epsilon, d);
    double loc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double r = rho(static_cast<Eigen::Index>(i));
        double dist = support.distance(grid, grid.position(i));
        double x = 1.0 + std::pow(dist, 4);
        loc = std::max(loc, x * std::pow(r, 2.0 / d));
    }
    localization_bound = loc * epsilon * epsilon;
}

double CoherentStateSpec::width() const { return delta > 0 ? delta : std::sqrt(epsilon); }

OnePDM free_fermi_gas(const Grid& grid, double epsilon) {
    if (!(epsilon > 0))
        throw PreconditionError("free_fermi_gas: epsilon must be positive");
    auto n = static_cast<Eigen::Index>(grid.size());
    Vector occ = Vector::Zero(n);
    int count = 0;
    for (Eigen::Index s = 0; s < n; ++s)
        if (grid.momentum_norm(static_cast<std::size_t>(s)) <= 1.0 / epsilon) {
            occ(s) = 1.0;
            ++count;
        }
    if (count == 0)
        throw PreconditionError("free_fermi_gas: Fermi ball contains no dual momentum");
    Matrix diag = occ.asDiagonal();
    return to_position(OperatorKernel::from_matrix(grid, diag, Representation::momentum));
}

std::vector<std::size_t> lowest_modes(const Grid& grid, int n) {
    if (n < 0 || static_cast<std::size_t>(n) > grid.size())
        throw PreconditionError("lowest_modes: particle number outside [0, sites]");
    std::vector<std::size_t> sites(grid.size());
    for (std::size_t s = 0; s < sites.size(); ++s)
        sites[s] = s;
    std::stable_sort(sites.begin(), sites.end(), [&](std::size_t a, std::size_t b) {
        double qa = grid.momentum_norm(a);
        double qb = grid.momentum_norm(b);
        if (std::abs(qa - qb) > 1e-12 * std::max(1.0, qa))
            return qa < qb;
        return grid.mode(a) < grid.mode(b);
    });
    sites.resize(static_cast<std::size_t>(n));
    return sites;
}

OnePDM free_fermi_gas_with_particles(const Grid& grid, int n) {
    auto modes = lowest_modes(grid, n);
    auto size = static_cast<Eigen::Index>(grid.size());
    Vector occ = Vector::Zero(size);
    for (auto s : modes)
        occ(static_cast<Eigen::Index>(s)) = 1.0;
    Matrix diag = occ.asDiagonal();
    return to_position(OperatorKernel::from_matrix(grid, diag, Representation::momentum));
}

Vector plane_wave(const Grid& grid, std::size_t mode_site) {
    auto n = static_cast<Eigen::Index>(grid.size());
    Vector f(n);
    Point q = grid.momentum(mode_site);
    double norm = 1.0 / std::sqrt(grid.volume());
    for (Eigen::Index i = 0; i < n; ++i) {
        Point x = grid.position(static_cast<std::size_t>(i));
        double phase = q[0] * x[0] + q[1] * x[1] + q[2] * x[2];
        f(i) = norm * std::polar(1.0, phase);
    }
    return f;
}

Vector gaussian_orbital(const Grid& grid, const Point& center, double width, const Point& k) {
    if (!(width > 0))
        throw PreconditionError("gaussian_orbital: width must be positive");
    auto n = static_cast<Eigen::Index>(grid.size());
    Vector f(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Point d = grid.displacement(grid.position(static_cast<std::size_t>(i)), center);
        double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        double phase = k[0] * d[0] + k[1] * d[1] + k[2] * d[2];
        f(i) = std::exp(-r2 / (2.0 * width * width)) * std::polar(1.0, phase);
    }
    double norm = std::sqrt(f.squaredNorm() * grid.cell_volume());
    if (norm == 0.0)
        throw NumericalError("gaussian_orbital: vanishing norm");
    return f / norm;
}

OnePDM coherent_state(const CoherentStateSpec& spec, CoherentStateInfo* info) {
    const Grid& grid = spec.profile.grid;
    const int d = grid.dim();
    const double delta = spec.width();
    for (int a = 0; a < d; ++a)
        if (delta < grid.spacing(a)) {
            std::ostringstream os;
            os << "coherent_state: Gaussian width " << delta << " below grid spacing "
               << grid.spacing(a);
            throw PreconditionError(os.str());
        }
    if ((spec.profile.rho.array() < 0).any())
        throw PreconditionError("coherent_state: negative density");

    const auto n = static_cast<Eigen::Index>(grid.size());
    const double h = grid.cell_volume();
    const double kappa = spec.kappa();
    const double target = spec.profile.total_particles();

    // Packet profile g(x - 0), normalized so that sum_x h |g|^2 = 1.
    RealVector g0(n);
    const Point origin{0.0, 0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) {
        Point dx = grid.displacement(grid.position(static_cast<std::size_t>(i)), origin);
        double r2 = dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2];
        g0(i) = std::exp(-r2 / (2.0 * delta * delta));
    }
    g0 /= std::sqrt(g0.squaredNorm() * h);

    auto diff_index = [&](std::size_t x, std::size_t y) {
        auto ix = grid.unravel(x);
        auto iy = grid.unravel(y);
        std::array<int, 3> dd{0, 0, 0};
        for (int a = 0; a < d; ++a)
            dd[a] = ix[a] - iy[a];
        return grid.ravel(dd);
    };
    // Displacement site table: diff(x, y) for every pair.
    std::vector<std::size_t> diff(static_cast<std::size_t>(n * n));
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y)
            diff[static_cast<std::size_t>(x * n + y)] =
                diff_index(static_cast<std::size_t>(x), static_cast<std::size_t>(y));

    // Fermi-ball sums P_r(D) = sum_q w_q(r) exp(i q.D). Each dual momentum
    // carries the fraction of its lattice cell (width dq) inside |q| <= k_F(r),
    // so the discrete ball volume tracks the continuum one instead of jumping
    // by whole modes.
    double dq = 2.0 * std::numbers::pi / grid.box_length(0);
    for (int a = 1; a < d; ++a)
        dq = std::min(dq, 2.0 * std::numbers::pi / grid.box_length(a));
    RealVector qnorm(n);
    for (Eigen::Index s = 0; s < n; ++s)
        qnorm(s) = grid.momentum_norm(static_cast<std::size_t>(s));
    Fourier fourier(grid);
    const double root_size = std::sqrt(static_cast<double>(grid.size()));
    std::map<double, Vector> ball_sums;
    auto ball_sum = [&](double kf) -> const Vector& {
        auto it = ball_sums.find(kf);
        if (it != ball_sums.end())
            return it->second;
        Vector w(n);
        for (Eigen::Index s = 0; s < n; ++s)
            w(s) = std::clamp((kf - qnorm(s)) / dq + 0.5, 0.0, 1.0);
        Vector p = fourier.inverse(w) * root_size;
        return ball_sums.emplace(kf, std::move(p)).first->second;
    };

    Matrix omega = Matrix::Zero(n, n);
    const double weight = h / static_cast<double>(grid.size());
    RealVector gr(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        double rho = spec.profile.rho(r);
        if (rho <= 0)
            continue;
        double kf = kappa * std::pow(rho, 1.0 / d);
        const Vector& p = ball_sum(kf);
        for (Eigen::Index x = 0; x < n; ++x)
            gr(x) = g0(static_cast<Eigen::Index>(diff_index(static_cast<std::size_t>(x),
                                                            static_cast<std::size_t>(r))));
        for (Eigen::Index y = 0; y < n; ++y) {
            double gy = gr(y);
            if (gy == 0.0)
                continue;
            for (Eigen::Index x = 0; x < n; ++x) {
                double gx = gr(x);
                omega(x, y) += (weight * gx * gy) *
                               p(static_cast<Eigen::Index>(diff[static_cast<std::size_t>(x * n + y)]));
            }
        }
    }
    omega = 0.5 * (omega + omega.adjoint()).eval();

    CoherentStateInfo meta;
    meta.target_particles = target;
    meta.raw_trace = omega.trace().real();
    if (meta.raw_trace > 0 && target > 0) {
        double mismatch = std::abs(meta.raw_trace - target) / target;
        if (mismatch > 0.01) {
            std::ostringstream os;
            os << "coherent_state: discrete trace " << meta.raw_trace << " misses N = " << target
               << " by more than 1%; refine the grid";
            throw PreconditionError(os.str());
        }
        meta.rescale_factor = target / meta.raw_trace;
        omega *= meta.rescale_factor;
    }
    RealVector spec_values = hermitian_spectrum(omega);
    meta.min_eigenvalue = spec_values.size() ? spec_values.minCoeff() : 0.0;
    meta.max_eigenvalue = spec_values.size() ? spec_values.maxCoeff() : 0.0;
    if (meta.min_eigenvalue < -1e-10 || meta.max_eigenvalue > 1.0 + 1e-10) {
        std::ostringstream os;
        os << "coherent_state: spectrum [" << meta.min_eigenvalue << ", " << meta.max_eigenvalue
           << "] leaves [0, 1] after normalization";
        throw NumericalError(os.str());
    }
    if (info)
        *info = meta;
    return OperatorKernel::from_matrix(grid, std::move(omega));
}

OnePDM slater_from_orbitals(const Grid& grid, const std::vector<Vector>& orbitals) {
    auto n = static_cast<Eigen::Index>(grid.size());
    auto k = static_cast<Eigen::Index>(orbitals.size());
    Matrix c(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (orbitals[static_cast<std::size_t>(j)].size() != n)
            throw PreconditionError("slater_from_orbitals: orbital does not match grid");
        c.col(j) = to_coefficients(grid, orbitals[static_cast<std::size_t>(j)]);
    }
    Matrix gram = c.adjoint() * c;
    double err = (gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
    if (k > 0 && err > 1e-10) {
        std::ostringstream os;
        os << "slater_from_orbitals: orbitals not orthonormal (Gram error " << err << ")";
        throw PreconditionError(os.str());
    }
    return OperatorKernel::from_matrix(grid, c * c.adjoint());
}

ManyBodyState slater_many_body(const Grid& grid, const std::vector<Vector>& orbitals) {
    const int n_part = static_cast<int>(orbitals.size());
    if (n_part > kMaxOracleParticles) {
        std::ostringstream os;
        os << "slater_many_body: N = " << n_part << " exceeds oracle limit "
           << kMaxOracleParticles;
        throw CapExceeded(os.str());
    }
    // Validates orthonormality.
    (void)slater_from_orbitals(grid, orbitals);

    const int sites = static_cast<int>(grid.size());
    SubsetBasis basis(sites, n_part);
    Matrix c(sites, n_part);
    for (int j = 0; j < n_part; ++j)
        c.col(j) = to_coefficients(grid, orbitals[static_cast<std::size_t>(j)]);

    Vector amp(static_cast<Eigen::Index>(basis.size()));
    Matrix sub(n_part, n_part);
    for (std::size_t idx = 0; idx < basis.size(); ++idx) {
        Occupation s = basis.state(idx);
        int row = 0;
        for (Occupation t = s; t; t &= t - 1)
            sub.row(row++) = c.row(__builtin_ctzll(t));
        amp(static_cast<Eigen::Index>(idx)) = n_part == 0 ? cplx(1.0) : sub.determinant();
    }
    return ManyBodyState{grid, n_part, std::move(amp)};
}

std::vector<Vector> occupied_orbitals(const OnePDM& projector, double tol) {
    OnePDM pos = to_position(projector);
    Matrix m = 0.5 * (pos.matrix() + pos.matrix().adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    std::vector<Vector> out;
    const RealVector& ev = es.eigenvalues();
    for (Eigen::Index i = ev.size() - 1; i >= 0; --i) {
        double v = ev(i);
        if (std::abs(v) > tol && std::abs(v - 1.0) > tol) {
            std::ostringstream os;
            os << "occupied_orbitals: eigenvalue " << v << " is neither 0 nor 1";
            throw PreconditionError(os.str());
        }
        if (v > 0.5)
            out.push_back(from_coefficients(pos.grid(), es.eigenvectors().col(i)));
    }
    return out;
}

} // namespace mf
