#include "meanfield/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include <fftw3.h>

#include "meanfield/errors.hpp"

namespace mf {

Grid::Grid(int dim, Point box_length, int points_per_axis)
    : dim_(dim), length_(box_length), m_(points_per_axis), size_(1) {
    if (dim < 1 || dim > 3)
        throw PreconditionError("grid dimension must be 1, 2 or 3");
    if (points_per_axis <= 0 || points_per_axis % 2 != 0)
        throw PreconditionError("points per axis must be a positive even integer");
    for (int a = 0; a < dim; ++a) {
        if (!(box_length[a] > 0.0) || !std::isfinite(box_length[a]))
            throw PreconditionError("box length must be positive and finite");
        size_ *= static_cast<std::size_t>(points_per_axis);
    }
    for (int a = dim; a < 3; ++a)
        length_[a] = 1.0;
}

Grid Grid::cube(int dim, double box_length, int points_per_axis) {
    return Grid(dim, {box_length, box_length, box_length}, points_per_axis);
}

double Grid::cell_volume() const {
    double w = 1.0;
    for (int a = 0; a < dim_; ++a)
        w *= spacing(a);
    return w;
}

double Grid::volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a)
        v *= length_[a];
    return v;
}

std::array<int, 3> Grid::unravel(std::size_t site) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(site % m_);
        site /= m_;
    }
    return idx;
}

std::size_t Grid::ravel(std::array<int, 3> index) const {
    std::size_t site = 0;
    for (int a = 0; a < dim_; ++a) {
        int j = ((index[a] % m_) + m_) % m_;
        site = site * m_ + static_cast<std::size_t>(j);
    }
    return site;
}

Point Grid::position(std::size_t site) const {
    auto idx = unravel(site);
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a)
        x[a] = idx[a] * spacing(a);
    return x;
}

std::array<int, 3> Grid::mode(std::size_t site) const {
    auto idx = unravel(site);
    for (int a = 0; a < dim_; ++a)
        if (idx[a] >= m_ / 2)
            idx[a] -= m_;
    return idx;
}

Point Grid::momentum(std::size_t site) const {
    auto k = mode(site);
    Point q{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a)
        q[a] = 2.0 * std::numbers::pi * k[a] / length_[a];
    return q;
}

double Grid::momentum_norm(std::size_t site) const {
    auto q = momentum(site);
    return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
}

Point Grid::displacement(const Point& x, const Point& y) const {
    Point d{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) {
        double L = length_[a];
        double s = x[a] - y[a];
        s -= L * std::round(s / L);
        d[a] = s;
    }
    return d;
}

double Grid::distance(const Point& x, const Point& y) const {
    auto d = displacement(x, y);
    return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
}

std::size_t Grid::shifted_mode(std::size_t q_site, std::size_t p_site) const {
    auto q = unravel(q_site);
    auto p = unravel(p_site);
    std::array<int, 3> s{0, 0, 0};
    for (int a = 0; a < dim_; ++a)
        s[a] = q[a] + p[a];
    return ravel(s);
}

std::vector<Point> Grid::positions() const {
    std::vector<Point> out(size_);
    for (std::size_t i = 0; i < size_; ++i)
        out[i] = position(i);
    return out;
}

bool Grid::operator==(const Grid& other) const {
    if (dim_ != other.dim_ || m_ != other.m_)
        return false;
    for (int a = 0; a < dim_; ++a)
        if (length_[a] != other.length_[a])
            return false;
    return true;
}

double Region::distance(const Grid& grid, const Point& x) const {
    if (whole)
        return 0.0;
    double sq = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
        double L = grid.box_length(a);
        double width = upper[a] - lower[a];
        // Offset of x above the lower edge, wrapped into [0, L).
        double u = std::fmod(x[a] - lower[a], L);
        if (u < 0)
            u += L;
        if (u <= width)
            continue;
        double d = std::min(u - width, L - u);
        sq += d * d;
    }
    return std::sqrt(sq);
}

namespace {

struct PlanPair {
    fftw_plan forward;
    fftw_plan backward;
};

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

// Plans are keyed by shape only and live for the whole process.
PlanPair plans_for(int dim, int m) {
    std::lock_guard<std::mutex> lock(plan_mutex());
    static std::map<std::pair<int, int>, PlanPair> cache;
    auto key = std::make_pair(dim, m);
    if (auto it = cache.find(key); it != cache.end())
        return it->second;

    int n[3] = {m, m, m};
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a)
        total *= static_cast<std::size_t>(m);
    auto* scratch = fftw_alloc_complex(total);
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p{fftw_plan_dft(dim, n, scratch, scratch, FFTW_FORWARD, flags),
               fftw_plan_dft(dim, n, scratch, scratch, FFTW_BACKWARD, flags)};
    fftw_free(scratch);
    cache.emplace(key, p);
    return p;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

} // namespace

Fourier::Fourier(const Grid& grid) : grid_(grid) {
    auto p = plans_for(grid.dim(), grid.points_per_axis());
    forward_plan_ = p.forward;
    backward_plan_ = p.backward;
    scale_ = 1.0 / std::sqrt(static_cast<double>(grid.size()));
}

Vector Fourier::forward(const Vector& f) const {
    if (static_cast<std::size_t>(f.size()) != grid_.size())
        throw PreconditionError("field size does not match grid");
    Vector out = f;
    fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), as_fftw(out.data()), as_fftw(out.data()));
    out *= scale_;
    return out;
}

Vector Fourier::inverse(const Vector& f) const {
    if (static_cast<std::size_t>(f.size()) != grid_.size())
        throw PreconditionError("field size does not match grid");
    Vector out = f;
    fftw_execute_dft(static_cast<fftw_plan>(backward_plan_), as_fftw(out.data()), as_fftw(out.data()));
    out *= scale_;
    return out;
}

void Fourier::transform_columns(Matrix& k, int sign) const {
    auto plan = static_cast<fftw_plan>(sign < 0 ? forward_plan_ : backward_plan_);
    for (Eigen::Index c = 0; c < k.cols(); ++c) {
        cplx* col = k.col(c).data();
        fftw_execute_dft(plan, as_fftw(col), as_fftw(col));
    }
    k *= scale_;
}

Matrix Fourier::conjugate_forward(const Matrix& k) const {
    if (static_cast<std::size_t>(k.rows()) != grid_.size() || k.rows() != k.cols())
        throw PreconditionError("kernel shape does not match grid");
    Matrix a = k;
    transform_columns(a, -1);
    Matrix b = a.adjoint();
    transform_columns(b, -1);
    return b.adjoint();
}

Matrix Fourier::conjugate_inverse(const Matrix& k) const {
    if (static_cast<std::size_t>(k.rows()) != grid_.size() || k.rows() != k.cols())
        throw PreconditionError("kernel shape does not match grid");
    Matrix a = k;
    transform_columns(a, +1);
    Matrix b = a.adjoint();
    transform_columns(b, +1);
    return b.adjoint();
}

Matrix Fourier::conjugate_by_multiplier(const Matrix& k, const Vector& phase) const {
    Matrix khat = conjugate_forward(k);
    khat = phase.asDiagonal() * khat * phase.conjugate().asDiagonal();
    return conjugate_inverse(khat);
}

Matrix Fourier::apply_multiplier(const Matrix& k, const Vector& multiplier) const {
    Matrix a = k;
    transform_columns(a, -1);
    a = multiplier.asDiagonal() * a;
    transform_columns(a, +1);
    return a;
}

RealVector Fourier::convolve(const RealVector& a, const RealVector& b) const {
    Vector fa = forward(a.cast<cplx>());
    Vector fb = forward(b.cast<cplx>());
    Vector prod = fa.cwiseProduct(fb);
    Vector c = inverse(prod);
    double factor = grid_.cell_volume() / scale_;
    return (c.real() * factor).eval();
}

} // namespace mf
