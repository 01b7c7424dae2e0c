// Reference solver used to cross-check coordinate descent. It shares no code
// with the main solvers beyond the criterion/KKT evaluators.

#include <cmath>

#include <Eigen/SVD>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/solvers.hpp"

namespace sparse_infer {
namespace {

constexpr long kMaxIterations = 1000000;

Vector prox(const Vector& v, const Vector& thresholds) {
    Vector out(v.size());
    for (Index j = 0; j < v.size(); ++j) {
        const double t = thresholds[j];
        out[j] = v[j] > t ? v[j] - t : (v[j] < -t ? v[j] + t : 0.0);
    }
    return out;
}

struct Smooth {
    const Matrix& x;
    const Vector& y;
    SolverMethod method;
    double n;

    double value(const Vector& b) const {
        const double q = (y - x * b).squaredNorm() / n;
        return method == SolverMethod::lasso ? q : std::sqrt(q);
    }
    Vector gradient(const Vector& b) const {
        const Vector r = y - x * b;
        if (method == SolverMethod::lasso) return -2.0 / n * (x.transpose() * r);
        const double norm = r.norm();
        if (!(norm > 0.0)) throw NumericalError("degenerate fit; criterion non-smooth at solution");
        return -(x.transpose() * r) / (std::sqrt(n) * norm);
    }
};

}  // namespace

SparseFit solve_oracle(const Matrix& x, const Vector& y, double lambda, SolverMethod method,
                       const IndexSet& unpenalized, const Vector& loadings) {
    if (x.cols() > 50 || x.rows() > 200) throw InputError("oracle solver is limited to p <= 50, n <= 200");
    if (x.rows() != y.size()) throw InputError("design rows do not match response length");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    const Vector w = penalty_weights(x.cols(), unpenalized, loadings);
    const double n = static_cast<double>(x.rows());
    const Smooth f{x, y, method, n};

    const double sv = Eigen::JacobiSVD<Matrix>(x).singularValues()[0];
    // Lasso: exact Lipschitz constant. Square-root: start there and backtrack.
    double step = sv > 0.0 ? n / (2.0 * sv * sv) : 1.0;
    if (method == SolverMethod::sqrt_lasso) step = sv > 0.0 ? std::sqrt(n) * y.norm() / (sv * sv) : 1.0;

    auto total = [&](const Vector& b) { return f.value(b) + lambda / n * w.cwiseProduct(b.cwiseAbs()).sum(); };

    Vector beta = Vector::Zero(x.cols());
    Vector z = beta;
    double t_mom = 1.0;
    double f_prev = total(beta);
    int quiet = 0;
    bool restarted = false;
    for (long it = 0; it < kMaxIterations; ++it) {
        const Vector g = f.gradient(z);
        const double fz = f.value(z);
        Vector next;
        while (true) {
            next = prox(z - step * g, step * lambda / n * w);
            if (method == SolverMethod::lasso) break;
            const Vector d = next - z;
            if (f.value(next) <= fz + g.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15 * std::abs(fz)) break;
            step *= 0.5;
        }
        const double f_next = total(next);
        const double move = (next - beta).cwiseAbs().maxCoeff();
        if (f_next > f_prev) {
            // Adaptive restart: drop momentum and retry from the last iterate.
            // A plain proximal step that still fails to descend means we are
            // at rounding level.
            if (restarted) break;
            z = beta;
            t_mom = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
        z = next + ((t_mom - 1.0) / t_next) * (next - beta);
        t_mom = t_next;
        beta = next;
        f_prev = f_next;
        quiet = move <= 1e-15 * std::max(1.0, beta.cwiseAbs().maxCoeff()) ? quiet + 1 : 0;
        if (quiet >= 20) break;
    }

    SparseFit fit;
    fit.beta = beta;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != 0.0) fit.support.push_back(j);
    }
    fit.lambda = lambda;
    fit.method = method;
    fit.objective = total(beta);
    fit.kkt_residual = kkt_residual(x, y, beta, lambda, method, w);
    return fit;
}

SparseFit solve_oracle(const Dataset& d, double lambda, SolverMethod method, const IndexSet& unpenalized) {
    return solve_oracle(d.x, d.y, lambda, method, unpenalized);
}

}  // namespace sparse_infer
