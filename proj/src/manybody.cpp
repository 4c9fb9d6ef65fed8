#include "meanfield/manybody.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meanfield/errors.hpp"

namespace mf {

void SparseHermitian::apply(const Vector& x, Vector& y) const {
    const std::size_t n = rows();
    y.resize(static_cast<Eigen::Index>(n));
    const cplx* xv = x.data();
    for (std::size_t r = 0; r < n; ++r) {
        cplx acc = 0.0;
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            acc += val[k] * xv[col[k]];
        y(static_cast<Eigen::Index>(r)) = acc;
    }
}

Matrix SparseHermitian::dense() const {
    auto n = static_cast<Eigen::Index>(rows());
    Matrix m = Matrix::Zero(n, n);
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            m(static_cast<Eigen::Index>(r), col[k]) += val[k];
    return m;
}

void check_oracle_cap(const Grid& grid, int particles) {
    std::size_t dim = SubsetBasis::binomial(static_cast<int>(grid.size()), particles);
    if (grid.size() > 63 || dim > kMaxOracleDimension) {
        std::ostringstream os;
        os << "many-body dimension C(" << grid.size() << ", " << particles << ") = " << dim
           << " exceeds the oracle cap " << kMaxOracleDimension;
        throw CapExceeded(os.str());
    }
}

ManyBodyHamiltonian::ManyBodyHamiltonian(const Grid& grid, int particles, const Potential& v,
                                         double epsilon, Dispersion dispersion, int coupling_power)
    : ManyBodyHamiltonian(grid, particles, v, one_body_matrix(grid, epsilon, dispersion),
                          PropagatorConfig{epsilon, 1.0, dispersion, false, coupling_power}.coupling(grid)) {}

ManyBodyHamiltonian::ManyBodyHamiltonian(const Grid& grid, int particles, const Potential& v,
                                         const Matrix& one_body, double coupling)
    : grid_(grid), particles_(particles),
      basis_((check_oracle_cap(grid, particles), static_cast<int>(grid.size())), particles),
      one_body_(one_body), coupling_(coupling) {
    if (v.grid() != grid_)
        throw PreconditionError("potential and many-body grid differ");
    if (one_body_.rows() != static_cast<Eigen::Index>(grid_.size()))
        throw PreconditionError("one-body matrix does not match grid");
    build(v);
}

void ManyBodyHamiltonian::build(const Potential& v) {
    const int m = static_cast<int>(grid_.size());
    const std::size_t dim = basis_.size();
    Eigen::MatrixXd pair = v.pair_table();

    h_.row_ptr.assign(dim + 1, 0);
    h_.col.clear();
    h_.val.clear();
    std::size_t per_row = 1 + static_cast<std::size_t>(particles_) * static_cast<std::size_t>(m - particles_);
    h_.col.reserve(dim * per_row);
    h_.val.reserve(dim * per_row);

    std::vector<std::pair<std::uint32_t, cplx>> row;
    std::vector<int> occ;
    for (std::size_t r = 0; r < dim; ++r) {
        const Occupation s = basis_.state(r);
        occ.clear();
        for (Occupation t = s; t; t &= t - 1)
            occ.push_back(__builtin_ctzll(t));

        double diag = 0.0;
        for (std::size_t a = 0; a < occ.size(); ++a) {
            diag += one_body_(occ[a], occ[a]).real();
            for (std::size_t b = a + 1; b < occ.size(); ++b)
                diag += coupling_ * pair(occ[a], occ[b]);
        }
        row.clear();
        row.emplace_back(static_cast<std::uint32_t>(r), cplx(diag));

        // <S| T_{ij} a*_i a_j |S'> with S' = S - i + j; the sign counts the
        // occupied sites strictly between i and j.
        for (int i : occ)
            for (int j = 0; j < m; ++j) {
                if (s & (Occupation{1} << j))
                    continue;
                cplx t = one_body_(i, j);
                if (t == cplx(0.0))
                    continue;
                Occupation other = (s & ~(Occupation{1} << i)) | (Occupation{1} << j);
                int lo = std::min(i, j), hi = std::max(i, j);
                Occupation between = s & ((Occupation{1} << hi) - 1) & ~((Occupation{1} << (lo + 1)) - 1);
                double sign = (__builtin_popcountll(between) & 1) ? -1.0 : 1.0;
                row.emplace_back(static_cast<std::uint32_t>(basis_.index(other)), sign * t);
            }
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [c, val] : row) {
            h_.col.push_back(c);
            h_.val.push_back(val);
        }
        h_.row_ptr[r + 1] = h_.col.size();
    }

    // Spectral enclosure: kinetic part between the sums of the lowest and
    // highest N one-body eigenvalues, interaction within C(N,2) [min V, max V].
    RealVector ev = hermitian_spectrum(one_body_);
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < particles_; ++k) {
        lo += ev(k);
        hi += ev(ev.size() - 1 - k);
    }
    double pairs = 0.5 * particles_ * (particles_ - 1);
    double vmin = pair.minCoeff(), vmax = pair.maxCoeff();
    lower_ = lo + pairs * coupling_ * std::min(0.0, vmin);
    upper_ = hi + pairs * coupling_ * std::max(0.0, vmax);
}

Vector ManyBodyHamiltonian::apply(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != basis_.size())
        throw PreconditionError("state does not match the many-body basis");
    Vector y;
    h_.apply(x, y);
    return y;
}

double ManyBodyHamiltonian::expectation(const Vector& x) const {
    return x.dot(apply(x)).real();
}

namespace {

// One Lanczos substep: y = exp(-i tau (H - shift)) x with error estimate.
struct LanczosResult {
    Vector y;
    double error = 0.0;
    bool breakdown = false;
};

LanczosResult lanczos_step(const HermitianAction& h, const Vector& x, double tau, double shift,
                           int m, long& matvecs) {
    const double beta0 = x.norm();
    const auto n = x.size();
    LanczosResult res;
    if (beta0 == 0.0) {
        res.y = x;
        return res;
    }
    Matrix basis(n, m + 1);
    basis.col(0) = x / beta0;
    std::vector<double> alpha, beta;
    const double scale = std::max(std::abs(h.upper - shift), std::abs(h.lower - shift));
    Vector w;
    int k = 0;
    for (; k < m; ++k) {
        h.apply(basis.col(k), w);
        ++matvecs;
        w -= shift * basis.col(k);
        double a = basis.col(k).dot(w).real();
        alpha.push_back(a);
        // full reorthogonalization, applied twice for stability
        for (int pass = 0; pass < 2; ++pass) {
            Vector coeff = basis.leftCols(k + 1).adjoint() * w;
            w -= basis.leftCols(k + 1) * coeff;
        }
        double b = w.norm();
        if (b <= 1e-13 * std::max(1.0, scale)) {
            res.breakdown = true;
            ++k;
            break;
        }
        beta.push_back(b);
        basis.col(k + 1) = w / b;
    }
    const int dim = k;
    auto small_exp = [&](int size) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(size, size);
        for (int i = 0; i < size; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < size) {
                t(i, i + 1) = beta[static_cast<std::size_t>(i)];
                t(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        Vector coeff(size);
        for (int i = 0; i < size; ++i)
            coeff(i) = std::polar(1.0, -tau * es.eigenvalues()(i)) * es.eigenvectors()(0, i);
        return Vector(es.eigenvectors().cast<cplx>() * coeff);
    };
    Vector c = small_exp(dim);
    if (res.breakdown || dim < 2) {
        res.error = 0.0;
    } else {
        Vector cprev = Vector::Zero(dim);
        cprev.head(dim - 1) = small_exp(dim - 1);
        res.error = beta0 * (c - cprev).norm();
    }
    res.y = beta0 * (basis.leftCols(dim) * c);
    return res;
}

} // namespace

Vector krylov_expv(const ManyBodyHamiltonian& h, const Vector& x, double tau,
                   const KrylovOptions& opts, KrylovStats* stats) {
    if (static_cast<std::size_t>(x.size()) != h.basis().size())
        throw PreconditionError("state does not match the many-body basis");
    HermitianAction action{[&h](const Vector& in, Vector& out) { h.matrix().apply(in, out); },
                           h.lower_bound(), h.upper_bound()};
    return krylov_expv(action, x, tau, opts, stats);
}

Vector krylov_expv(const HermitianAction& h, const Vector& x, double tau,
                   const KrylovOptions& opts, KrylovStats* stats) {
    if (opts.dimension < 2)
        throw PreconditionError("Krylov dimension must be at least 2");
    KrylovStats local;
    KrylovStats& st = stats ? *stats : local;
    if (tau == 0.0)
        return x;
    if (h.upper < h.lower)
        throw PreconditionError("Krylov: empty spectral enclosure");
    const double shift = 0.5 * (h.lower + h.upper);
    const double radius = std::max(0.5 * (h.upper - h.lower), 1e-300);
    const double direction = tau > 0 ? 1.0 : -1.0;
    double remaining = std::abs(tau);
    double step = std::min(remaining, opts.max_phase / radius);
    Vector y = x;
    while (remaining > 0.0) {
        step = std::min(step, remaining);
        LanczosResult r = lanczos_step(h, y, direction * step, shift, opts.dimension, st.matvecs);
        if (!r.y.allFinite())
            throw NumericalError("Krylov step produced non-finite amplitudes");
        if (r.error > opts.tolerance) {
            step *= 0.5;
            ++st.halvings;
            if (step < 1e-14 * std::abs(tau))
                throw NumericalError("Krylov substep underflow: local error cannot be met");
            continue;
        }
        if (r.breakdown)
            ++st.breakdowns;
        st.max_local_error = std::max(st.max_local_error, r.error);
        y = r.y * std::polar(1.0, -direction * step * shift);
        remaining -= step;
        ++st.substeps;
        if (remaining < 1e-15 * std::abs(tau))
            remaining = 0.0;
    }
    return y;
}

ManyBodyState exact_evolve(const ManyBodyState& psi, const ManyBodyHamiltonian& h, double t,
                           double epsilon, const KrylovOptions& opts, KrylovStats* stats) {
    if (!(epsilon > 0))
        throw PreconditionError("exact_evolve: epsilon must be positive");
    if (psi.n_particles != h.particles() || psi.grid != h.grid())
        throw PreconditionError("exact_evolve: state and Hamiltonian differ in grid or N");
    return {psi.grid, psi.n_particles, krylov_expv(h, psi.amplitudes, t / epsilon, opts, stats)};
}

ManyBodyState dense_evolve(const ManyBodyState& psi, const ManyBodyHamiltonian& h, double t,
                           double epsilon) {
    if (h.basis().size() > 4096)
        throw CapExceeded("dense_evolve: dimension above 4096");
    Matrix dense = h.matrix().dense();
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
    Vector c = es.eigenvectors().adjoint() * psi.amplitudes;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        c(i) *= std::polar(1.0, -t / epsilon * es.eigenvalues()(i));
    return {psi.grid, psi.n_particles, es.eigenvectors() * c};
}

OnePDM reduce_one_pdm(const ManyBodyState& psi) {
    const int m = static_cast<int>(psi.grid.size());
    SubsetBasis basis(m, psi.n_particles);
    if (static_cast<std::size_t>(psi.amplitudes.size()) != basis.size())
        throw PreconditionError("reduce_one_pdm: amplitude count does not match C(M, N)");
    Matrix gamma = Matrix::Zero(m, m);
    for (std::size_t idx = 0; idx < basis.size(); ++idx) {
        cplx a = psi.amplitudes(static_cast<Eigen::Index>(idx));
        if (a == cplx(0.0))
            continue;
        Occupation s = basis.state(idx);
        for (Occupation t = s; t; t &= t - 1) {
            int i = __builtin_ctzll(t);
            gamma(i, i) += std::norm(a);
            for (int j = 0; j < m; ++j) {
                if (s & (Occupation{1} << j))
                    continue;
                // a*_j a_i |S> = sign |S - i + j>
                Occupation other = (s & ~(Occupation{1} << i)) | (Occupation{1} << j);
                int lo = std::min(i, j), hi = std::max(i, j);
                Occupation between = s & ((Occupation{1} << hi) - 1) & ~((Occupation{1} << (lo + 1)) - 1);
                double sign = (__builtin_popcountll(between) & 1) ? -1.0 : 1.0;
                gamma(i, j) += sign * std::conj(psi.amplitudes(static_cast<Eigen::Index>(basis.index(other)))) * a;
            }
        }
    }
    gamma = 0.5 * (gamma + gamma.adjoint()).eval();
    return OperatorKernel::from_matrix(psi.grid, std::move(gamma));
}

double aliasing_metric(const ManyBodyState& psi) {
    OnePDM g = to_momentum(reduce_one_pdm(psi));
    const Grid& grid = psi.grid;
    double cutoff = 0.375 * grid.points_per_axis();
    double outer = 0.0, total = 0.0;
    for (std::size_t s = 0; s < grid.size(); ++s) {
        double w = g.matrix()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)).real();
        total += w;
        auto mode = grid.mode(s);
        for (int a = 0; a < grid.dim(); ++a)
            if (std::abs(mode[a]) >= cutoff) {
                outer += w;
                break;
            }
    }
    return total > 0 ? outer / total : 0.0;
}

KacCheckResult kac_equivalence_check(const ManyBodyState& psi, const PotentialSpec& v,
                                     double gamma_scale, double t, double max_aliasing,
                                     const KrylovOptions& opts) {
    if (!(gamma_scale > 0))
        throw PreconditionError("kac_equivalence_check: gamma must be positive");
    KacCheckResult res;
    res.aliasing = aliasing_metric(psi);
    if (res.aliasing > max_aliasing) {
        std::ostringstream os;
        os << "kac_equivalence_check: grid too coarse, aliasing metric " << res.aliasing
           << " exceeds " << max_aliasing;
        throw PreconditionError(os.str());
    }
    const Grid& g = psi.grid;
    const int d = g.dim();
    const double eps = 1.0 / gamma_scale;

    // eps side on the original box
    Potential v_eps = Potential::from_spec(g, v);
    ManyBodyHamiltonian h_eps(g, psi.n_particles, v_eps, eps);
    ManyBodyState side_b = exact_evolve(psi, h_eps, t, eps, opts, &res.eps_stats);

    // Kac side on the dilated box: -Laplacian, gamma^{-d} V(x / gamma), time gamma t
    Point dilated{};
    for (int a = 0; a < d; ++a)
        dilated[a] = g.box_length(a) * gamma_scale;
    Grid kac(d, dilated, g.points_per_axis());
    Potential v_kac = Potential::from_spec(kac, v, gamma_scale);
    ManyBodyHamiltonian h_kac(kac, psi.n_particles, v_kac,
                              one_body_matrix(kac, 1.0, Dispersion::nonrelativistic),
                              std::pow(gamma_scale, -d));
    // U_gamma^{-1} psi carries the same orthonormal amplitudes on the dilated grid.
    ManyBodyState phi{kac, psi.n_particles, psi.amplitudes};
    ManyBodyState side_a = exact_evolve(phi, h_kac, gamma_scale * t, 1.0, opts, &res.kac_stats);

    res.distance = (side_a.amplitudes - side_b.amplitudes).norm();
    return res;
}

ConvergenceRecord compare_states(double time, const OnePDM& gamma, const OnePDM& omega) {
    if (gamma.grid() != omega.grid())
        throw PreconditionError("compare_states: grids differ");
    const Matrix g = to_position(gamma).matrix();
    const Matrix w = to_position(omega).matrix();
    ConvergenceRecord r;
    r.time = time;
    Matrix diff = g - w;
    NormReport n = norms(diff);
    r.hs_distance = n.hs_norm;
    r.trace_distance = n.trace_norm;
    r.fluct_number = std::max(0.0, 2.0 * (g - g * w).trace().real());
    r.purity = (w - w * w).trace().real();
    r.particles = w.trace().real();
    if (r.hs_distance * r.hs_distance > r.fluct_number + 1e-9) {
        std::ostringstream os;
        os << "convergence record at t = " << time << " violates ||gamma - omega||_HS^2 = "
           << r.hs_distance * r.hs_distance << " <= 2 tr gamma(1 - omega) = " << r.fluct_number;
        throw NumericalError(os.str());
    }
    return r;
}

std::vector<ConvergenceRecord> convergence_series(const ManyBodyState& psi0, const OnePDM& omega0,
                                                  const Potential& v, const PropagatorConfig& cfg,
                                                  const std::vector<double>& times,
                                                  const KrylovOptions& opts,
                                                  std::vector<OnePDM>* mean_field_states) {
    double n_psi = static_cast<double>(psi0.n_particles);
    if (std::abs(omega0.trace().real() - n_psi) > 1e-8)
        throw PreconditionError("convergence_distance: tr omega_0 differs from the particle count");
    if (psi0.grid != omega0.grid())
        throw PreconditionError("convergence_distance: grids differ");
    if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0))
        throw PreconditionError("convergence_distance: times must be ascending and nonnegative");

    ManyBodyHamiltonian h(psi0.grid, psi0.n_particles, v, cfg.epsilon, cfg.dispersion,
                          cfg.coupling_power);
    HartreePropagator prop(omega0.grid(), v, cfg);
    std::vector<ConvergenceRecord> out;
    ManyBodyState psi = psi0;
    Matrix omega = to_position(omega0).matrix();
    double now = 0.0;
    int steps_done = 0;
    for (double t : times) {
        int target = step_count(t, cfg.dt);
        for (; steps_done < target; ++steps_done)
            omega = prop.step(omega);
        psi = exact_evolve(psi, h, t - now, cfg.epsilon, opts);
        now = t;
        OnePDM w = OperatorKernel::from_matrix(omega0.grid(), omega);
        out.push_back(compare_states(t, reduce_one_pdm(psi), w));
        if (mean_field_states)
            mean_field_states->push_back(std::move(w));
    }
    return out;
}

ConvergenceRecord convergence_distance(const ManyBodyState& psi0, const OnePDM& omega0,
                                       const Potential& v, const PropagatorConfig& cfg, double t,
                                       const KrylovOptions& opts) {
    return convergence_series(psi0, omega0, v, cfg, {t}, opts).front();
}

} // namespace mf
