#include <sstream>

#include <Eigen/QR>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/solvers.hpp"

namespace sparse_infer {

OlsFit post_ols(const Matrix& x, const Vector& y, const IndexSet& selected, const IndexSet& always_include) {
    if (x.rows() != y.size()) throw InputError("design rows do not match response length");
    const Index n = x.rows();
    const Index p = x.cols();
    OlsFit fit;
    fit.columns = set_union(selected, always_include);
    for (const Index j : fit.columns) {
        if (j < 0 || j >= p) throw InputError("selected index out of range");
    }
    const auto k = static_cast<Index>(fit.columns.size());
    if (k >= n) {
        std::ostringstream msg;
        msg << "selected model too large: " << k << " columns for " << n << " observations";
        throw InputError(msg.str());
    }

    fit.beta = Vector::Zero(p);
    if (k == 0) {
        fit.residuals = y;
    } else {
        Matrix xs(n, k);
        for (Index c = 0; c < k; ++c) xs.col(c) = x.col(fit.columns[static_cast<std::size_t>(c)]);
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xs);
        const Vector b = cod.solve(y);
        for (Index c = 0; c < k; ++c) fit.beta[fit.columns[static_cast<std::size_t>(c)]] = b[c];
        fit.residuals = y - xs * b;
        fit.dof_used = cod.rank();
        if (cod.rank() < k) {
            std::ostringstream msg;
            msg << "selected columns are collinear (rank " << cod.rank() << " of " << k
                << "); using the minimum-norm least-squares solution";
            fit.warnings.push_back(msg.str());
        }
    }
    const double rss = fit.residuals.squaredNorm();
    fit.sigma2_hat = rss / static_cast<double>(n);
    fit.sigma2_dof = rss / static_cast<double>(n - fit.dof_used);
    return fit;
}

OlsFit post_ols(const Dataset& d, const IndexSet& selected, const IndexSet& always_include) {
    return post_ols(d.x, d.y, selected, always_include);
}

}  // namespace sparse_infer
