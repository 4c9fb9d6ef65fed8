#include "meanfield/fock.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meanfield/errors.hpp"

namespace mf {

namespace {

using Triplet = Eigen::Triplet<cplx>;

std::size_t fock_dim(int modes) { return std::size_t{1} << modes; }

// Apply a_site (create = false) or a*_site to the bitstring `s` in place,
// accumulating the Jordan-Wigner sign. Returns false when the result vanishes.
bool ladder(Occupation& s, int site, bool create, double& sign) {
    const Occupation bit = Occupation{1} << site;
    if (static_cast<bool>(s & bit) == create)
        return false;
    sign *= ordering_sign(s, site);
    s ^= bit;
    return true;
}

FockOperator from_triplets(int modes, const std::vector<Triplet>& t) {
    auto n = static_cast<Eigen::Index>(fock_dim(modes));
    FockOperator op(n, n);
    op.setFromTriplets(t.begin(), t.end());
    op.prune(cplx(0.0));
    return op;
}

int modes_of(const Vector& f) { return static_cast<int>(f.size()); }

void check_vector(const FockVector& v, int modes) {
    if (v.n_modes != modes || v.amplitudes.size() != static_cast<Eigen::Index>(fock_dim(modes)))
        throw PreconditionError("Fock vector does not match the mode count");
}

// Two-operator sums sum_ij J_ij b_i c_j with b, c ladder operators of the given kinds.
FockOperator bilinear(const Matrix& j, bool first_create, bool second_create) {
    if (j.rows() != j.cols())
        throw PreconditionError("Fock bilinear: matrix must be square");
    const int m = static_cast<int>(j.rows());
    check_fock_modes(m);
    std::vector<Triplet> t;
    for (Occupation s = 0; s < fock_dim(m); ++s)
        for (int b = 0; b < m; ++b) {
            Occupation s1 = s;
            double sign1 = 1.0;
            if (!ladder(s1, b, second_create, sign1))
                continue;
            for (int a = 0; a < m; ++a) {
                cplx coef = j(a, b);
                if (coef == cplx(0.0))
                    continue;
                Occupation s2 = s1;
                double sign2 = sign1;
                if (!ladder(s2, a, first_create, sign2))
                    continue;
                t.emplace_back(static_cast<Eigen::Index>(s2), static_cast<Eigen::Index>(s), sign2 * coef);
            }
        }
    return from_triplets(m, t);
}

} // namespace

void check_fock_modes(int modes) {
    if (modes < 0 || modes > kMaxFockModes) {
        std::ostringstream os;
        os << "Fock space with " << modes << " modes exceeds the cap of " << kMaxFockModes;
        throw CapExceeded(os.str());
    }
}

FockVector FockVector::vacuum(int modes) {
    check_fock_modes(modes);
    FockVector v{modes, Vector::Zero(static_cast<Eigen::Index>(fock_dim(modes)))};
    v.amplitudes(0) = 1.0;
    return v;
}

FockOperator annihilation_operator(int modes, int site) {
    Vector f = Vector::Zero(modes);
    if (site < 0 || site >= modes)
        throw PreconditionError("annihilation_operator: site out of range");
    f(site) = 1.0;
    return annihilate(f);
}

FockOperator creation_operator(int modes, int site) {
    Vector f = Vector::Zero(modes);
    if (site < 0 || site >= modes)
        throw PreconditionError("creation_operator: site out of range");
    f(site) = 1.0;
    return create(f);
}

FockOperator annihilate(const Vector& f) {
    const int m = modes_of(f);
    check_fock_modes(m);
    std::vector<Triplet> t;
    for (Occupation s = 0; s < fock_dim(m); ++s)
        for (int i = 0; i < m; ++i) {
            if (f(i) == cplx(0.0))
                continue;
            Occupation r = s;
            double sign = 1.0;
            if (ladder(r, i, false, sign))
                t.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s),
                               sign * std::conj(f(i)));
        }
    return from_triplets(m, t);
}

FockOperator create(const Vector& f) {
    return FockOperator(annihilate(f).adjoint());
}

FockVector apply_operator(const FockOperator& op, const FockVector& v) {
    if (op.cols() != v.amplitudes.size())
        throw PreconditionError("Fock operator and vector dimensions differ");
    return FockVector{v.n_modes, op * v.amplitudes};
}

FockOperator number_operator(int modes) {
    check_fock_modes(modes);
    std::vector<Triplet> t;
    for (Occupation s = 0; s < fock_dim(modes); ++s)
        if (s)
            t.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s),
                           cplx(__builtin_popcountll(s)));
    return from_triplets(modes, t);
}

FockOperator parity_operator(int modes) {
    check_fock_modes(modes);
    std::vector<Triplet> t;
    for (Occupation s = 0; s < fock_dim(modes); ++s)
        t.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s),
                       cplx((__builtin_popcountll(s) & 1) ? -1.0 : 1.0));
    return from_triplets(modes, t);
}

FockOperator second_quantize(const Matrix& j) { return bilinear(j, true, false); }
FockOperator pair_annihilation(const Matrix& j) { return bilinear(j, false, false); }
FockOperator pair_creation(const Matrix& j) { return bilinear(j, true, true); }

Matrix one_pdm(const FockVector& psi) {
    const int m = psi.n_modes;
    check_vector(psi, m);
    Matrix g = Matrix::Zero(m, m);
    const Vector& a = psi.amplitudes;
    for (Occupation s = 0; s < fock_dim(m); ++s) {
        const cplx as = a(static_cast<Eigen::Index>(s));
        if (as == cplx(0.0))
            continue;
        for (int i = 0; i < m; ++i) {
            Occupation s1 = s;
            double sign1 = 1.0;
            if (!ladder(s1, i, false, sign1))
                continue;
            for (int j = 0; j < m; ++j) {
                Occupation s2 = s1;
                double sign2 = sign1;
                if (!ladder(s2, j, true, sign2))
                    continue;
                g(i, j) += std::conj(a(static_cast<Eigen::Index>(s2))) * as * sign2;
            }
        }
    }
    return g;
}

double number_expectation(const FockVector& psi) {
    double n = 0.0;
    for (Eigen::Index s = 0; s < psi.amplitudes.size(); ++s)
        n += std::norm(psi.amplitudes(s)) * __builtin_popcountll(static_cast<Occupation>(s));
    return n;
}

FockVector slater_fock(const std::vector<Vector>& orbitals) {
    if (orbitals.empty())
        throw PreconditionError("slater_fock: need at least one orbital (use vacuum)");
    FockVector v = FockVector::vacuum(static_cast<int>(orbitals.front().size()));
    for (auto it = orbitals.rbegin(); it != orbitals.rend(); ++it) {
        if (it->size() != v.n_modes)
            throw PreconditionError("slater_fock: orbitals of different lengths");
        v = apply_operator(create(*it), v);
    }
    return v;
}

FockVector to_fock(const ManyBodyState& psi) {
    const int m = static_cast<int>(psi.grid.size());
    check_fock_modes(m);
    SubsetBasis basis(m, psi.n_particles);
    if (static_cast<std::size_t>(psi.amplitudes.size()) != basis.size())
        throw PreconditionError("to_fock: amplitudes do not match the subset basis");
    FockVector v{m, Vector::Zero(static_cast<Eigen::Index>(fock_dim(m)))};
    for (std::size_t k = 0; k < basis.size(); ++k)
        v.amplitudes(static_cast<Eigen::Index>(basis.state(k))) = psi.amplitudes(static_cast<Eigen::Index>(k));
    return v;
}

ManyBodyState to_many_body(const FockVector& v, const Grid& grid, int particles) {
    const int m = static_cast<int>(grid.size());
    check_vector(v, m);
    SubsetBasis basis(m, particles);
    ManyBodyState psi{grid, particles, Vector(static_cast<Eigen::Index>(basis.size()))};
    for (std::size_t k = 0; k < basis.size(); ++k)
        psi.amplitudes(static_cast<Eigen::Index>(k)) = v.amplitudes(static_cast<Eigen::Index>(basis.state(k)));
    double outside = std::max(0.0, v.amplitudes.squaredNorm() - psi.amplitudes.squaredNorm());
    if (outside > 1e-16 + 1e-12 * v.amplitudes.squaredNorm()) {
        std::ostringstream os;
        os << "to_many_body: weight " << outside << " outside the " << particles << "-particle sector";
        throw PreconditionError(os.str());
    }
    return psi;
}

FockHamiltonian FockHamiltonian::build(const Matrix& one_body, const Eigen::MatrixXd& pair,
                                       double coupling) {
    const int m = static_cast<int>(one_body.rows());
    if (pair.rows() != m || pair.cols() != m || one_body.cols() != m)
        throw PreconditionError("Fock Hamiltonian: one-body and pair tables differ in size");
    FockHamiltonian h;
    h.matrix = second_quantize(0.5 * (one_body + one_body.adjoint()));
    std::vector<Triplet> t;
    for (Occupation s = 0; s < fock_dim(m); ++s) {
        double e = 0.0;
        for (int a = 0; a < m; ++a)
            if (s >> a & 1)
                for (int b = a + 1; b < m; ++b)
                    if (s >> b & 1)
                        e += pair(a, b);
        if (e != 0.0)
            t.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s), cplx(coupling * e));
    }
    h.matrix += from_triplets(m, t);
    h.matrix.makeCompressed();

    // Gershgorin discs.
    h.lower = std::numeric_limits<double>::infinity();
    h.upper = -h.lower;
    for (Eigen::Index r = 0; r < h.matrix.outerSize(); ++r) {
        double diag = 0.0, off = 0.0;
        for (FockOperator::InnerIterator it(h.matrix, r); it; ++it) {
            if (it.col() == r)
                diag += it.value().real();
            else
                off += std::abs(it.value());
        }
        h.lower = std::min(h.lower, diag - off);
        h.upper = std::max(h.upper, diag + off);
    }
    return h;
}

FockHamiltonian FockHamiltonian::on_grid(const Grid& grid, const Potential& v, double epsilon,
                                         Dispersion dispersion, int coupling_power) {
    if (v.grid() != grid)
        throw PreconditionError("potential and Fock grid differ");
    check_fock_modes(static_cast<int>(grid.size()));
    PropagatorConfig cfg;
    cfg.epsilon = epsilon;
    cfg.dispersion = dispersion;
    cfg.coupling_power = coupling_power;
    return build(one_body_matrix(grid, epsilon, dispersion), v.pair_table(), cfg.coupling(grid));
}

HermitianAction FockHamiltonian::action() const {
    const FockOperator* m = &matrix;
    return HermitianAction{[m](const Vector& x, Vector& y) { y = (*m) * x; }, lower, upper};
}

BogoliubovMap::BogoliubovMap(const Matrix& projector, BogoliubovPhase phase, double tol)
    : modes_(static_cast<int>(projector.rows())), particles_(0), convention_(phase) {
    if (projector.rows() != projector.cols())
        throw PreconditionError("Bogoliubov map: projector must be square");
    check_fock_modes(modes_);
    require_finite(projector, "Bogoliubov projector");
    double herm = (projector - projector.adjoint()).norm();
    double idem = (projector * projector - projector).norm();
    if (herm > tol || idem > tol) {
        std::ostringstream os;
        os << "Bogoliubov map needs an orthogonal projector (||P - P*|| = " << herm
           << ", ||P^2 - P|| = " << idem << ")";
        throw PreconditionError(os.str());
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (projector + projector.adjoint()));
    const auto& ev = es.eigenvalues();
    for (Eigen::Index k = 0; k < ev.size(); ++k)
        if (ev(k) > 0.5)
            ++particles_;
    // Occupied orbitals first, then the completion.
    orbitals_.resize(modes_, modes_);
    for (int k = 0; k < particles_; ++k)
        orbitals_.col(k) = es.eigenvectors().col(modes_ - 1 - k);
    for (int k = particles_; k < modes_; ++k)
        orbitals_.col(k) = es.eigenvectors().col(k - particles_);

    for (int j = 0; j < particles_; ++j) {
        creators_.push_back(create(orbitals_.col(j)));
        annihilators_.push_back(annihilate(orbitals_.col(j)));
    }

    // Q = T_1 ... T_N maps Omega to theta * Slater; Q^2 = sigma is a sign.
    phase_ = 1.0;
    FockVector q_vac = apply(FockVector::vacuum(modes_));
    cplx theta = slater().amplitudes.dot(q_vac.amplitudes);
    if (std::abs(std::abs(theta) - 1.0) > 1e-8)
        throw NumericalError("Bogoliubov map: R Omega is not the Slater vector");
    if (convention_ == BogoliubovPhase::vacuum) {
        phase_ = std::conj(theta) / std::abs(theta);
    } else {
        cplx sigma = apply(q_vac).amplitudes(0);
        phase_ = sigma.real() > 0 ? cplx(1.0) : cplx(0.0, -1.0);
    }
}

FockVector BogoliubovMap::apply(const FockVector& v) const {
    check_vector(v, modes_);
    Vector x = v.amplitudes;
    const Eigen::Index n = x.size();
    for (int j = particles_ - 1; j >= 0; --j) {
        // P_j = (-1)^N (1 - 2 a*(f_j) a(f_j)), then Phi_j = a*(f_j) + a(f_j).
        Vector y = x - 2.0 * (creators_[j] * (annihilators_[j] * x));
        for (Eigen::Index s = 0; s < n; ++s)
            if (__builtin_popcountll(static_cast<Occupation>(s)) & 1)
                y(s) = -y(s);
        x = creators_[j] * y + annihilators_[j] * y;
    }
    return FockVector{modes_, phase_ * x};
}

FockVector BogoliubovMap::apply_adjoint(const FockVector& v) const {
    check_vector(v, modes_);
    Vector x = v.amplitudes;
    const Eigen::Index n = x.size();
    for (int j = 0; j < particles_; ++j) {
        Vector y = creators_[j] * x + annihilators_[j] * x;
        x = y - 2.0 * (creators_[j] * (annihilators_[j] * y));
        for (Eigen::Index s = 0; s < n; ++s)
            if (__builtin_popcountll(static_cast<Occupation>(s)) & 1)
                x(s) = -x(s);
    }
    return FockVector{modes_, std::conj(phase_) * x};
}

FockVector BogoliubovMap::slater() const {
    if (particles_ == 0)
        return FockVector::vacuum(modes_);
    std::vector<Vector> occ;
    for (int j = 0; j < particles_; ++j)
        occ.emplace_back(orbitals_.col(j));
    return slater_fock(occ);
}

Matrix BogoliubovMap::dense() const {
    if (modes_ > 10)
        throw CapExceeded("BogoliubovMap::dense is limited to 10 modes");
    auto n = static_cast<Eigen::Index>(fock_dim(modes_));
    Matrix r(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        FockVector e{modes_, Vector::Zero(n)};
        e.amplitudes(c) = 1.0;
        r.col(c) = apply(e).amplitudes;
    }
    return r;
}

std::vector<FluctuationSample> fluctuation_dynamics(const FockVector& xi0,
                                                    const std::vector<Matrix>& omegas,
                                                    const FockHamiltonian& h,
                                                    const std::vector<double>& times,
                                                    double epsilon, const KrylovOptions& opts) {
    if (omegas.size() != times.size() || times.empty())
        throw PreconditionError("fluctuation_dynamics: need one projector per time");
    if (!(epsilon > 0))
        throw PreconditionError("fluctuation_dynamics: epsilon must be positive");
    if (xi0.n_modes > kMaxFluctuationModes)
        throw CapExceeded("fluctuation_dynamics is limited to 12 modes");
    for (const Matrix& w : omegas)
        if (w.rows() != xi0.n_modes || w.cols() != xi0.n_modes)
            throw PreconditionError("fluctuation_dynamics: trajectory and lattice differ in size");
    if (h.matrix.rows() != xi0.amplitudes.size())
        throw PreconditionError("fluctuation_dynamics: Hamiltonian and lattice differ in size");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (times[k] < times[k - 1])
            throw PreconditionError("fluctuation_dynamics: times must be ascending");

    HermitianAction act = h.action();
    Vector psi = BogoliubovMap(omegas.front()).apply(xi0).amplitudes;
    double now = times.front();
    std::vector<FluctuationSample> out;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] > now)
            psi = krylov_expv(act, psi, (times[k] - now) / epsilon, opts);
        now = times[k];
        BogoliubovMap r(omegas[k]);
        FockVector state{xi0.n_modes, psi};
        FockVector xi = r.apply_adjoint(state);
        Matrix gamma = one_pdm(state);
        const Eigen::Index m = gamma.rows();
        double fl = 2.0 * (gamma * (Matrix::Identity(m, m) - omegas[k])).trace().real();
        out.push_back({now, number_expectation(xi), fl});
    }
    return out;
}

} // namespace mf
