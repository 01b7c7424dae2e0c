#pragma once

#include <cmath>

#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

namespace test_support {

using sparse_infer::Index;
using sparse_infer::Matrix;
using sparse_infer::Vector;

inline Matrix gaussian_matrix(sparse_infer::Rng& rng, Index n, Index p) {
    Matrix x(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) x(i, j) = rng.normal();
    return x;
}

/// n x p design with AR(rho) rows: corr(x_j, x_k) = rho^|j-k|.
inline Matrix ar_matrix(sparse_infer::Rng& rng, Index n, Index p, double rho) {
    Matrix x(n, p);
    const double s = std::sqrt(1.0 - rho * rho);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        for (Index j = 1; j < p; ++j) x(i, j) = rho * x(i, j - 1) + s * rng.normal();
    }
    return x;
}

}  // namespace test_support
