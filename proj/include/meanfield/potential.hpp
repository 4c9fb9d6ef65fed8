#pragma once

#include <string>

#include "meanfield/grid.hpp"

namespace mf {

/// Parametric description of a two-body interaction or a smooth test function.
struct PotentialSpec {
    enum class Shape { zero, gaussian };
    Shape shape = Shape::gaussian;
    double v0 = 1.0;
    double sigma = 0.1;
};

PotentialSpec::Shape parse_potential_shape(const std::string& name);
std::string to_string(PotentialSpec::Shape shape);

/// Real function of the displacement on the torus, V(x) for x in the box.
///
/// Samples are V at the minimum-image displacement of each grid site from the
/// origin, so V(x_i - x_j) is a table lookup. Fourier coefficients are
/// V_hat(p) = h^d sum_x V(x) exp(-i p.x) on the dual lattice.
class Potential {
public:
    static Potential zero(const Grid& grid);
    static Potential gaussian(const Grid& grid, double v0, double sigma);
    /// Samples V(x / length_scale) for the given shape.
    static Potential from_spec(const Grid& grid, const PotentialSpec& spec, double length_scale = 1.0);
    static Potential from_samples(const Grid& grid, RealVector samples);

    const Grid& grid() const { return grid_; }
    const RealVector& samples() const { return samples_; }
    const Vector& fourier() const { return fourier_; }

    /// V(x_a - x_b) for two grid sites.
    double pair(std::size_t a, std::size_t b) const;
    /// Table of V(x_a - x_b) over all site pairs.
    Eigen::MatrixXd pair_table() const;
    /// x -> V(x - z) for a grid site z.
    RealVector centered_at(std::size_t z_site) const;

    /// Periodic convolution (V * f)(x) = h^d sum_y V(x - y) f(y).
    RealVector convolve(const RealVector& f) const;

    /// Entry m holds sum_p (1 + |p|^m) |V_hat(p)| over the dual lattice, m = 0..max_power.
    RealVector smoothness_report(int max_power) const;

    bool is_zero() const { return samples_.cwiseAbs().maxCoeff() == 0.0; }
    /// V real and even implies V_hat real and even.
    bool fourier_real_and_even(double tol = 1e-10) const;

private:
    Potential(Grid grid, RealVector samples);

    Grid grid_;
    RealVector samples_;
    Vector fourier_;
};

} // namespace mf
