#include "meanfield/kernel.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "meanfield/errors.hpp"

namespace mf {

namespace {

void check_shape(const Grid& grid, const Matrix& m) {
    auto n = static_cast<Eigen::Index>(grid.size());
    if (m.rows() != n || m.cols() != n) {
        std::ostringstream os;
        os << "kernel of shape " << m.rows() << "x" << m.cols() << " does not match grid with "
           << n << " sites";
        throw PreconditionError(os.str());
    }
}

} // namespace

OperatorKernel::OperatorKernel(Grid grid, const Matrix& entries, Representation rep)
    : grid_(std::move(grid)), rep_(rep) {
    check_shape(grid_, entries);
    matrix_ = entries * grid_.cell_volume();
}

OperatorKernel::OperatorKernel(Grid grid, Matrix matrix, Representation rep, int)
    : grid_(std::move(grid)), matrix_(std::move(matrix)), rep_(rep) {
    check_shape(grid_, matrix_);
}

OperatorKernel OperatorKernel::from_matrix(Grid grid, Matrix matrix, Representation rep) {
    return OperatorKernel(std::move(grid), std::move(matrix), rep, 0);
}

OperatorKernel OperatorKernel::zero(Grid grid) {
    auto n = static_cast<Eigen::Index>(grid.size());
    return from_matrix(std::move(grid), Matrix::Zero(n, n));
}

OperatorKernel OperatorKernel::identity(Grid grid) {
    auto n = static_cast<Eigen::Index>(grid.size());
    return from_matrix(std::move(grid), Matrix::Identity(n, n));
}

Matrix OperatorKernel::entries() const { return matrix_ / grid_.cell_volume(); }

bool OperatorKernel::is_hermitian(double tol) const {
    return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

RealVector OperatorKernel::diagonal_density() const {
    if (rep_ != Representation::position)
        return to_position(*this).diagonal_density();
    return matrix_.diagonal().real() / grid_.cell_volume();
}

OperatorKernel to_momentum(const OperatorKernel& k) {
    if (k.representation() == Representation::momentum)
        return k;
    Fourier f(k.grid());
    return OperatorKernel::from_matrix(k.grid(), f.conjugate_forward(k.matrix()),
                                       Representation::momentum);
}

OperatorKernel to_position(const OperatorKernel& k) {
    if (k.representation() == Representation::position)
        return k;
    Fourier f(k.grid());
    return OperatorKernel::from_matrix(k.grid(), f.conjugate_inverse(k.matrix()),
                                       Representation::position);
}

void require_finite(const Matrix& k, const char* what) {
    for (Eigen::Index j = 0; j < k.cols(); ++j)
        for (Eigen::Index i = 0; i < k.rows(); ++i)
            if (!std::isfinite(k(i, j).real()) || !std::isfinite(k(i, j).imag())) {
                std::ostringstream os;
                os << what << ": non-finite entry at (" << i << ", " << j << ")";
                throw NumericalError(os.str());
            }
}

RealVector singular_values(const Matrix& k) {
    require_finite(k, "singular_values");
    if (k.rows() == 0 || k.cols() == 0)
        return RealVector();
    if (k.rows() + k.cols() <= 4096) {
        // Eigenvalues of the Hermitian dilation [[0, K], [K*, 0]] are +-s_i (and zeros).
        // Backward stable; Eigen 3.4.0's BDCSVD loses digits on clustered spectra.
        const Eigen::Index r = k.rows(), c = k.cols();
        Matrix d = Matrix::Zero(r + c, r + c);
        d.topRightCorner(r, c) = k;
        d.bottomLeftCorner(c, r) = k.adjoint();
        Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
        RealVector ev = es.eigenvalues().reverse().head(std::min(r, c));
        return ev.cwiseMax(0.0);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(k.adjoint() * k, Eigen::EigenvaluesOnly);
    RealVector ev = es.eigenvalues().reverse();
    return ev.cwiseMax(0.0).cwiseSqrt();
}

NormReport norms(const Matrix& k) {
    RealVector s = singular_values(k);
    NormReport r;
    if (s.size() == 0)
        return r;
    r.trace_norm = s.sum();
    r.hs_norm = s.norm();
    r.op_norm = s.maxCoeff();
    return r;
}

NormReport norms(const OperatorKernel& k) { return norms(k.matrix()); }

double trace_norm(const Matrix& k) { return singular_values(k).sum(); }

double hs_norm(const Matrix& k) {
    require_finite(k, "hs_norm");
    return k.norm();
}

OperatorKernel apply_function_of_position(const OperatorKernel& k, const Vector& f, Side side) {
    if (static_cast<std::size_t>(f.size()) != k.size())
        throw PreconditionError("function of position does not match grid size");
    for (Eigen::Index i = 0; i < f.size(); ++i)
        if (!std::isfinite(f(i).real()) || !std::isfinite(f(i).imag()))
            throw NumericalError("function of position is not finite");
    OperatorKernel pos = to_position(k);
    Matrix m = side == Side::left ? Matrix(f.asDiagonal() * pos.matrix())
                                  : Matrix(pos.matrix() * f.asDiagonal());
    return OperatorKernel::from_matrix(pos.grid(), std::move(m));
}

RealVector hermitian_spectrum(const Matrix& k) {
    require_finite(k, "hermitian_spectrum");
    Eigen::SelfAdjointEigenSolver<Matrix> es(k, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

bool monotonicity_check(const Matrix& a, const Matrix& b, const Matrix& c) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.cols() != c.rows())
        throw PreconditionError("monotonicity_check: incompatible shapes");
    Matrix gap = b.adjoint() * b - a.adjoint() * a;
    gap = 0.5 * (gap + gap.adjoint()).eval();
    double lowest = hermitian_spectrum(gap).minCoeff();
    if (lowest < -1e-10) {
        std::ostringstream os;
        os << "monotonicity_check: |A|^2 <= |B|^2 violated, min eigenvalue " << lowest;
        throw PreconditionError(os.str());
    }
    return trace_norm(a * c) <= trace_norm(b * c) + 1e-10;
}

bool monotonicity_check(const OperatorKernel& a, const OperatorKernel& b, const OperatorKernel& c) {
    if (a.grid() != b.grid() || a.grid() != c.grid())
        throw PreconditionError("monotonicity_check: kernels on different grids");
    return monotonicity_check(to_position(a).matrix(), to_position(b).matrix(),
                              to_position(c).matrix());
}

} // namespace mf
