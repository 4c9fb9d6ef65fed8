#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace mf {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Point = std::array<double, 3>;

/// Periodic box [0, L_1) x ... x [0, L_dim) sampled with M points per axis.
///
/// Sites are numbered row-major with the first axis slowest. Position of
/// site index (j_1, ..., j_d) is (j_1 h_1, ..., j_d h_d). The dual momentum
/// attached to the same index is 2 pi m_a / L_a with m_a the FFT-ordered
/// integer in [-M/2, M/2).
class Grid {
public:
    Grid(int dim, Point box_length, int points_per_axis);

    /// Same box length along every axis.
    static Grid cube(int dim, double box_length, int points_per_axis);

    int dim() const { return dim_; }
    int points_per_axis() const { return m_; }
    std::size_t size() const { return size_; }
    double box_length(int axis) const { return length_[axis]; }
    double spacing(int axis) const { return length_[axis] / m_; }
    /// Quadrature weight h_1 ... h_dim.
    double cell_volume() const;
    double volume() const;

    std::array<int, 3> unravel(std::size_t site) const;
    std::size_t ravel(std::array<int, 3> index) const;

    Point position(std::size_t site) const;
    /// FFT-ordered integer mode number along each axis.
    std::array<int, 3> mode(std::size_t site) const;
    Point momentum(std::size_t site) const;
    double momentum_norm(std::size_t site) const;

    /// Minimum-image displacement x - y on the torus.
    Point displacement(const Point& x, const Point& y) const;
    double distance(const Point& x, const Point& y) const;

    /// Mode index of q + p where both are given as mode indices; wraps on the torus.
    std::size_t shifted_mode(std::size_t q_site, std::size_t p_site) const;

    std::vector<Point> positions() const;

    bool operator==(const Grid& other) const;
    bool operator!=(const Grid& other) const { return !(*this == other); }

private:
    int dim_;
    Point length_;
    int m_;
    std::size_t size_;
};

/// Axis-aligned sub-box of the torus; `whole` covers the full box.
struct Region {
    Point lower{0.0, 0.0, 0.0};
    Point upper{0.0, 0.0, 0.0};
    bool whole = true;

    static Region full() { return {}; }
    static Region box(Point lower, Point upper) { return {lower, upper, false}; }

    /// Periodic Euclidean distance from x to the region; zero inside.
    double distance(const Grid& grid, const Point& x) const;
    bool contains(const Grid& grid, const Point& x) const { return distance(grid, x) == 0.0; }
};

/// Unitary discrete Fourier transform on a grid, backed by FFTW.
///
/// forward: f_hat(q) = M^{-d/2} sum_x exp(-i q.x) f(x). Plans are shared
/// per (dim, M) and created under a lock; execution is reentrant.
class Fourier {
public:
    explicit Fourier(const Grid& grid);

    Vector forward(const Vector& f) const;
    Vector inverse(const Vector& f) const;

    /// F K F^* and F^* K F for matrices in the orthonormal site basis.
    Matrix conjugate_forward(const Matrix& k) const;
    Matrix conjugate_inverse(const Matrix& k) const;

    /// U K U^* with U = F^* diag(phase) F, i.e. a Fourier multiplier.
    Matrix conjugate_by_multiplier(const Matrix& k, const Vector& phase) const;
    /// Apply F^* diag(multiplier) F to each column of k.
    Matrix apply_multiplier(const Matrix& k, const Vector& multiplier) const;

    /// Periodic convolution (a * b)(x) = sum_y h^d a(x - y) b(y).
    RealVector convolve(const RealVector& a, const RealVector& b) const;

    const Grid& grid() const { return grid_; }

private:
    void transform_columns(Matrix& k, int sign) const;

    Grid grid_;
    void* forward_plan_;
    void* backward_plan_;
    double scale_;
};

} // namespace mf
