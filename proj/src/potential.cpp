#include "meanfield/potential.hpp"

#include <cmath>

#include "meanfield/errors.hpp"

namespace mf {

PotentialSpec::Shape parse_potential_shape(const std::string& name) {
    if (name == "zero" || name == "none")
        return PotentialSpec::Shape::zero;
    if (name == "gaussian")
        return PotentialSpec::Shape::gaussian;
    throw ConfigError("unknown potential shape '" + name + "'");
}

std::string to_string(PotentialSpec::Shape shape) {
    return shape == PotentialSpec::Shape::zero ? "zero" : "gaussian";
}

Potential::Potential(Grid grid, RealVector samples)
    : grid_(std::move(grid)), samples_(std::move(samples)) {
    if (static_cast<std::size_t>(samples_.size()) != grid_.size())
        throw PreconditionError("potential samples do not match grid");
    for (Eigen::Index i = 0; i < samples_.size(); ++i)
        if (!std::isfinite(samples_(i)))
            throw NumericalError("potential sample is not finite");
    Fourier f(grid_);
    double scale = grid_.cell_volume() * std::sqrt(static_cast<double>(grid_.size()));
    fourier_ = f.forward(samples_.cast<cplx>()) * scale;
}

Potential Potential::zero(const Grid& grid) {
    return Potential(grid, RealVector::Zero(static_cast<Eigen::Index>(grid.size())));
}

Potential Potential::gaussian(const Grid& grid, double v0, double sigma) {
    return from_spec(grid, {PotentialSpec::Shape::gaussian, v0, sigma});
}

Potential Potential::from_spec(const Grid& grid, const PotentialSpec& spec, double length_scale) {
    auto n = static_cast<Eigen::Index>(grid.size());
    if (spec.shape == PotentialSpec::Shape::zero || spec.v0 == 0.0)
        return zero(grid);
    if (!(spec.sigma > 0) || !(length_scale > 0))
        throw ConfigError("gaussian potential needs sigma > 0");
    RealVector v(n);
    const Point origin{0.0, 0.0, 0.0};
    const double s = spec.sigma * length_scale;
    for (Eigen::Index i = 0; i < n; ++i) {
        Point d = grid.displacement(grid.position(static_cast<std::size_t>(i)), origin);
        double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        v(i) = spec.v0 * std::exp(-r2 / (2.0 * s * s));
    }
    return Potential(grid, std::move(v));
}

Potential Potential::from_samples(const Grid& grid, RealVector samples) {
    return Potential(grid, std::move(samples));
}

double Potential::pair(std::size_t a, std::size_t b) const {
    auto ia = grid_.unravel(a);
    auto ib = grid_.unravel(b);
    std::array<int, 3> d{0, 0, 0};
    for (int ax = 0; ax < grid_.dim(); ++ax)
        d[ax] = ia[ax] - ib[ax];
    return samples_(static_cast<Eigen::Index>(grid_.ravel(d)));
}

Eigen::MatrixXd Potential::pair_table() const {
    auto n = static_cast<Eigen::Index>(grid_.size());
    Eigen::MatrixXd t(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            t(a, b) = pair(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    return t;
}

RealVector Potential::centered_at(std::size_t z_site) const {
    auto n = static_cast<Eigen::Index>(grid_.size());
    RealVector out(n);
    for (Eigen::Index x = 0; x < n; ++x)
        out(x) = pair(static_cast<std::size_t>(x), z_site);
    return out;
}

RealVector Potential::convolve(const RealVector& f) const {
    if (f.size() != samples_.size())
        throw PreconditionError("convolve: field does not match grid");
    Fourier fourier(grid_);
    return fourier.convolve(samples_, f);
}

RealVector Potential::smoothness_report(int max_power) const {
    RealVector out = RealVector::Zero(max_power + 1);
    for (std::size_t s = 0; s < grid_.size(); ++s) {
        double p = grid_.momentum_norm(s);
        double a = std::abs(fourier_(static_cast<Eigen::Index>(s)));
        for (int m = 0; m <= max_power; ++m)
            out(m) += (1.0 + std::pow(p, m)) * a;
    }
    return out;
}

bool Potential::fourier_real_and_even(double tol) const {
    double scale = std::max(1.0, fourier_.cwiseAbs().maxCoeff());
    for (std::size_t s = 0; s < grid_.size(); ++s) {
        cplx v = fourier_(static_cast<Eigen::Index>(s));
        if (std::abs(v.imag()) > tol * scale)
            return false;
        auto m = grid_.unravel(s);
        std::array<int, 3> neg{0, 0, 0};
        for (int a = 0; a < grid_.dim(); ++a)
            neg[a] = -m[a];
        cplx w = fourier_(static_cast<Eigen::Index>(grid_.ravel(neg)));
        if (std::abs(v - w) > tol * scale)
            return false;
    }
    return true;
}

} // namespace mf
