#pragma once

#include "meanfield/grid.hpp"

namespace mf {

enum class Representation { position, momentum };
enum class Side { left, right };

/// Integral kernel k(x_i; x_j) on a grid.
///
/// The action is (K f)(x_i) = h^d sum_j k(x_i; x_j) f(x_j), so the matrix of K
/// in the orthonormal site basis is h^d times the kernel entries. Traces and
/// norms are taken from that matrix and approximate the continuum quantities
/// without further weights. A kernel in the momentum representation stores the
/// same orthonormal matrix conjugated by the unitary DFT.
class OperatorKernel {
public:
    /// Build from kernel samples k(x_i; x_j).
    OperatorKernel(Grid grid, const Matrix& entries,
                   Representation rep = Representation::position);

    /// Build from the matrix in the orthonormal basis.
    static OperatorKernel from_matrix(Grid grid, Matrix matrix,
                                      Representation rep = Representation::position);
    static OperatorKernel zero(Grid grid);
    static OperatorKernel identity(Grid grid);

    const Grid& grid() const { return grid_; }
    Representation representation() const { return rep_; }

    /// Orthonormal-basis matrix; what every algebraic operation uses.
    const Matrix& matrix() const { return matrix_; }
    /// Kernel samples k(x_i; x_j) = matrix / h^d.
    Matrix entries() const;

    cplx trace() const { return matrix_.trace(); }
    bool is_hermitian(double tol = 1e-12) const;
    /// Diagonal kernel values k(x_i; x_i).
    RealVector diagonal_density() const;

    std::size_t size() const { return grid_.size(); }

private:
    OperatorKernel(Grid grid, Matrix matrix, Representation rep, int);

    Grid grid_;
    Matrix matrix_;
    Representation rep_;
};

/// Discretized one-particle density matrix.
using OnePDM = OperatorKernel;

struct NormReport {
    double trace_norm = 0.0;
    double hs_norm = 0.0;
    double op_norm = 0.0;
};

OperatorKernel to_momentum(const OperatorKernel& k);
OperatorKernel to_position(const OperatorKernel& k);

/// Singular values in descending order, from the Hermitian dilation when rows + cols <= 4096, otherwise
/// square roots of the eigenvalues of K^*K.
RealVector singular_values(const Matrix& k);

NormReport norms(const Matrix& k);
NormReport norms(const OperatorKernel& k);
double trace_norm(const Matrix& k);
double hs_norm(const Matrix& k);

/// F(x) K (left) or K F(x) (right); K is brought to the position representation first.
OperatorKernel apply_function_of_position(const OperatorKernel& k, const Vector& f, Side side);

/// Checks ||A C||_tr <= ||B C||_tr + 1e-10 given |A|^2 <= |B|^2.
/// Throws PreconditionError when B^*B - A^*A has an eigenvalue below -1e-10.
bool monotonicity_check(const Matrix& a, const Matrix& b, const Matrix& c);
bool monotonicity_check(const OperatorKernel& a, const OperatorKernel& b, const OperatorKernel& c);

/// Sorted eigenvalues of a Hermitian matrix (ascending).
RealVector hermitian_spectrum(const Matrix& k);

/// Throws NumericalError naming the first non-finite entry.
void require_finite(const Matrix& k, const char* what);

} // namespace mf
