// Cyclic coordinate descent for the Lasso and Square-root Lasso criteria.
//
// Each outer pass does one full sweep, then sweeps the active set (nonzero or
// unpenalized coordinates) until coefficient changes are negligible, then
// recomputes the residual from scratch and checks the KKT conditions. The
// loop ends only once the KKT residual is within tolerance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/solvers.hpp"

namespace sparse_infer {
namespace {

// Values within rounding of the threshold map to zero, so a penalty equal to
// lambda_max yields the zero solution whatever the summation order.
double soft_threshold(double v, double t) {
    if (std::abs(v) <= t * (1.0 + 1e-13)) return 0.0;
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_inputs(const Matrix& x, const Vector& y, double lambda, const Vector& weights) {
    if (x.rows() != y.size()) throw InputError("design rows do not match response length");
    if (x.rows() < 1 || x.cols() < 1) throw InputError("empty design");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    if (!x.allFinite() || !y.allFinite()) throw InputError("non-finite entry in design or response");
    if (weights.size() != x.cols()) throw InputError("penalty loadings length does not match p");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw InputError("penalty loadings must be finite and >= 0");
}

class CoordinateDescent {
public:
    CoordinateDescent(const Matrix& x, const Vector& y, double lambda, const Vector& weights, SolverMethod method,
                      const SolverOptions& opts)
        : x_(x), y_(y), lambda_(lambda), w_(weights), method_(method), opts_(opts), n_(static_cast<double>(x.rows())) {
        beta_ = opts.warm_start.size() == x.cols() ? opts.warm_start : Vector::Zero(x.cols());
        col_sq_ = x.colwise().squaredNorm().transpose();
        refresh_residual();
    }

    SparseFit run() {
        const Index p = x_.cols();
        Index sweeps = 0;
        const double inner_tol = opts_.tol * 0.05;
        std::vector<Index> active;
        double kkt = 0.0;
        while (true) {
            double change = 0.0;
            for (Index j = 0; j < p; ++j) change = std::max(change, update(j));
            ++sweeps;
            check_degenerate();

            active.clear();
            for (Index j = 0; j < p; ++j) {
                if (beta_[j] != 0.0 || w_[j] == 0.0) active.push_back(j);
            }
            while (change > inner_tol && sweeps < opts_.max_sweeps) {
                change = 0.0;
                for (const Index j : active) change = std::max(change, update(j));
                ++sweeps;
                check_degenerate();
            }

            refresh_residual();
            check_degenerate();
            kkt = kkt_residual(x_, y_, beta_, lambda_, method_, w_);
            if (kkt <= opts_.tol) break;
            if (sweeps >= opts_.max_sweeps) {
                std::ostringstream msg;
                msg << to_string(method_) << " did not reach KKT tolerance " << opts_.tol << " within "
                    << opts_.max_sweeps << " sweeps (residual " << kkt << ")";
                throw NumericalError(msg.str());
            }
        }

        SparseFit fit;
        fit.beta = beta_;
        for (Index j = 0; j < p; ++j) {
            if (beta_[j] != 0.0) fit.support.push_back(j);
        }
        fit.lambda = lambda_;
        fit.method = method_;
        fit.objective = criterion(x_, y_, beta_, lambda_, method_, w_);
        fit.kkt_residual = kkt;
        fit.sweeps = sweeps;
        return fit;
    }

private:
    void refresh_residual() {
        r_ = y_ - x_ * beta_;
        rss_ = r_.squaredNorm();
    }

    void check_degenerate() const {
        if (method_ != SolverMethod::sqrt_lasso) return;
        if (rss_ <= 1e-24 * std::max(1.0, y_.squaredNorm()))
            throw NumericalError("degenerate fit; criterion non-smooth at solution");
    }

    // Exact minimization along coordinate j. Returns the coefficient change
    // expressed on the gradient scale of the criterion.
    double update(Index j) {
        const double a = col_sq_[j];
        if (a <= 0.0) return 0.0;
        const double old = beta_[j];
        const double xr = x_.col(j).dot(r_);
        const double c = xr + a * old;
        double next = 0.0;
        double scale = 2.0 * std::sqrt(a / n_);
        if (method_ == SolverMethod::lasso) {
            next = soft_threshold(c, 0.5 * lambda_ * w_[j]) / a;
        } else {
            // Minimize sqrt(E - 2cb + ab^2) + L|b| with E the partial-residual
            // sum of squares and L = lambda * omega / sqrt(n).
            const double e = std::max(rss_ + 2.0 * old * xr + a * old * old, 0.0);
            const double pen = lambda_ * w_[j] / std::sqrt(n_);
            if (pen == 0.0) {
                next = c / a;
            } else if (c * c > pen * pen * e * (1.0 + 1e-13)) {
                const double s2 = std::max(e - c * c / a, 0.0);
                next = sign_of(c) * (std::abs(c) / a - pen * std::sqrt(s2) / std::sqrt(a * (a - pen * pen)));
            }
            scale = std::sqrt(a / n_) / std::sqrt(std::max(rss_ / n_, 1e-300));
        }
        const double delta = next - old;
        if (delta != 0.0) {
            r_.noalias() -= delta * x_.col(j);
            beta_[j] = next;
            if (method_ == SolverMethod::sqrt_lasso) rss_ = r_.squaredNorm();
        }
        return std::abs(delta) * scale;
    }

    const Matrix& x_;
    const Vector& y_;
    double lambda_;
    const Vector& w_;
    SolverMethod method_;
    const SolverOptions& opts_;
    double n_;
    Vector beta_;
    Vector col_sq_;
    Vector r_;
    double rss_ = 0.0;
};

SparseFit run_cd(const Matrix& x, const Vector& y, double lambda, const IndexSet& unpenalized,
                 const SolverOptions& opts, SolverMethod method) {
    if (!(opts.tol > 0.0)) throw InputError("tol must be > 0");
    const Vector w = penalty_weights(x.cols(), unpenalized, opts.loadings);
    check_inputs(x, y, lambda, w);
    if (opts.warm_start.size() != 0 && opts.warm_start.size() != x.cols())
        throw InputError("warm start length does not match p");
    return CoordinateDescent(x, y, lambda, w, method, opts).run();
}

}  // namespace

std::string to_string(SolverMethod m) { return m == SolverMethod::lasso ? "lasso" : "sqrt_lasso"; }

Vector penalty_weights(Index p, const IndexSet& unpenalized, const Vector& loadings) {
    if (loadings.size() != 0 && loadings.size() != p) throw InputError("penalty loadings length does not match p");
    Vector w = loadings.size() == p ? loadings : Vector::Ones(p);
    for (const Index j : unpenalized) {
        if (j < 0 || j >= p) throw InputError("unpenalized index out of range");
        w[j] = 0.0;
    }
    return w;
}

double criterion(const Matrix& x, const Vector& y, const Vector& beta, double lambda, SolverMethod method,
                 const Vector& weights) {
    const double n = static_cast<double>(x.rows());
    const double q = (y - x * beta).squaredNorm() / n;
    const double pen = lambda / n * weights.cwiseProduct(beta.cwiseAbs()).sum();
    return (method == SolverMethod::lasso ? q : std::sqrt(q)) + pen;
}

double kkt_residual(const Matrix& x, const Vector& y, const Vector& beta, double lambda, SolverMethod method,
                    const Vector& weights) {
    const double n = static_cast<double>(x.rows());
    const Vector r = y - x * beta;
    Vector grad = x.transpose() * r / n;  // E_n[x_j r]
    if (method == SolverMethod::lasso) {
        grad *= 2.0;
    } else {
        const double rms = std::sqrt(r.squaredNorm() / n);
        if (!(rms > 0.0)) return std::numeric_limits<double>::infinity();
        grad /= rms;
    }
    double worst = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
        const double pen = weights[j] * lambda / n;
        const double v = beta[j] != 0.0 ? std::abs(grad[j] - sign_of(beta[j]) * pen)
                                        : std::max(0.0, std::abs(grad[j]) - pen);
        worst = std::max(worst, v);
    }
    return worst;
}

double lasso_lambda_max(const Matrix& x, const Vector& y, const IndexSet& unpenalized, const Vector& loadings) {
    const Vector w = penalty_weights(x.cols(), unpenalized, loadings);
    Vector r = y;
    if (!unpenalized.empty()) r = post_ols(x, y, {}, unpenalized).residuals;
    // Same per-column dot product as the coordinate update, so lambda_max
    // is an exact threshold rather than one off by rounding.
    double best = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
        if (w[j] > 0.0) best = std::max(best, 2.0 * std::abs(x.col(j).dot(r)) / w[j]);
    }
    return best;
}

SparseFit fit_lasso(const Matrix& x, const Vector& y, double lambda, const IndexSet& unpenalized,
                    const SolverOptions& opts) {
    return run_cd(x, y, lambda, unpenalized, opts, SolverMethod::lasso);
}

SparseFit fit_lasso(const Dataset& d, double lambda, const IndexSet& unpenalized, const SolverOptions& opts) {
    return fit_lasso(d.x, d.y, lambda, unpenalized, opts);
}

SparseFit fit_sqrt_lasso(const Matrix& x, const Vector& y, double lambda, const IndexSet& unpenalized,
                         const SolverOptions& opts) {
    return run_cd(x, y, lambda, unpenalized, opts, SolverMethod::sqrt_lasso);
}

SparseFit fit_sqrt_lasso(const Dataset& d, double lambda, const IndexSet& unpenalized, const SolverOptions& opts) {
    return fit_sqrt_lasso(d.x, d.y, lambda, unpenalized, opts);
}

}  // namespace sparse_infer
