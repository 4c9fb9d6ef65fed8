#pragma once

#include <random>

#include "meanfield/grid.hpp"

namespace mf::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = cplx(n(rng), n(rng));
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
    return random_matrix(rng, n, 1).col(0);
}

inline Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
    Matrix a = random_matrix(rng, n, n);
    return 0.5 * (a + a.adjoint());
}

inline Matrix random_unitary(std::mt19937_64& rng, Eigen::Index n) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
    return qr.householderQ() * Matrix::Identity(n, n);
}

/// Rank-k orthogonal projector with a random range.
inline Matrix random_projector(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
    Matrix u = random_unitary(rng, n).leftCols(k);
    return u * u.adjoint();
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

} // namespace mf::testing
