#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparse_infer/dataset.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

namespace sparse_infer {

enum class SolverMethod { lasso, sqrt_lasso };

std::string to_string(SolverMethod m);

/// Criterion minimized by the solvers, with per-coordinate penalty weights
/// omega_j (zero for unpenalized coordinates):
///   lasso:       E_n[(y - x'b)^2]       + (lambda/n) sum_j omega_j |b_j|
///   sqrt_lasso:  sqrt(E_n[(y - x'b)^2]) + (lambda/n) sum_j omega_j |b_j|
struct SolverOptions {
    double tol = 1e-8;          // bound on the KKT residual at return
    Index max_sweeps = 100000;  // full + active-set sweeps
    Vector loadings;            // omega; empty means all ones
    Vector warm_start;          // optional initial coefficients
};

struct SparseFit {
    Vector beta;
    IndexSet support;  // {j : beta_j != 0}
    double lambda = 0.0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    SolverMethod method = SolverMethod::lasso;
    Index sweeps = 0;
};

/// Penalty weights: `loadings` (or ones) with unpenalized entries zeroed.
Vector penalty_weights(Index p, const IndexSet& unpenalized, const Vector& loadings = {});

double criterion(const Matrix& x, const Vector& y, const Vector& beta, double lambda, SolverMethod method,
                 const Vector& weights);

/// Largest violation of the subgradient optimality conditions, measured on
/// the gradient scale of the criterion. Recomputes residuals from scratch.
double kkt_residual(const Matrix& x, const Vector& y, const Vector& beta, double lambda, SolverMethod method,
                    const Vector& weights);

/// Smallest lambda for which the Lasso solution has every penalized
/// coefficient at zero: max_j 2 |x_j' r0| / omega_j, with r0 the residual
/// of the unpenalized least-squares fit.
double lasso_lambda_max(const Matrix& x, const Vector& y, const IndexSet& unpenalized, const Vector& loadings = {});

SparseFit fit_lasso(const Matrix& x, const Vector& y, double lambda, const IndexSet& unpenalized,
                    const SolverOptions& opts = {});
SparseFit fit_lasso(const Dataset& d, double lambda, const IndexSet& unpenalized, const SolverOptions& opts = {});

/// Throws NumericalError when the fit interpolates (zero residual), where
/// the square-root criterion is not differentiable.
SparseFit fit_sqrt_lasso(const Matrix& x, const Vector& y, double lambda, const IndexSet& unpenalized,
                         const SolverOptions& opts = {});
SparseFit fit_sqrt_lasso(const Dataset& d, double lambda, const IndexSet& unpenalized,
                         const SolverOptions& opts = {});

/// Least squares restricted to `selected` U `always_include`.
struct OlsFit {
    Vector beta;       // length p, exactly zero off the fitted columns
    Vector residuals;  // length n
    IndexSet columns;  // fitted columns
    double sigma2_hat = 0.0;  // RSS / n
    double sigma2_dof = 0.0;  // RSS / (n - dof_used)
    Index dof_used = 0;       // rank of the fitted design
    std::vector<std::string> warnings;
};

/// Rank-deficient designs get the minimum-norm solution and a warning.
OlsFit post_ols(const Matrix& x, const Vector& y, const IndexSet& selected, const IndexSet& always_include = {});
OlsFit post_ols(const Dataset& d, const IndexSet& selected, const IndexSet& always_include = {});

/// Slow, independent check: accelerated proximal gradient with adaptive
/// restart (and backtracking for the square-root criterion). Test scale only.
SparseFit solve_oracle(const Matrix& x, const Vector& y, double lambda, SolverMethod method,
                       const IndexSet& unpenalized, const Vector& loadings = {});
SparseFit solve_oracle(const Dataset& d, double lambda, SolverMethod method, const IndexSet& unpenalized);

enum class EigenMode { exact, sampled };

struct SparseEigenvalues {
    double min = 0.0;
    double max = 0.0;
    bool exact = true;  // false: min is an upper bound and max a lower bound
    Index subsets_evaluated = 0;
};

/// Extreme m-sparse eigenvalues of the empirical Gram matrix E_n[x_i x_i'].
/// Exact mode enumerates all C(p, m) <= 1e6 supports; sampled mode draws
/// `draws` random supports.
SparseEigenvalues sparse_eigenvalues(const Dataset& d, Index m, EigenMode mode, Index draws = 10000,
                                     const SeedSpec& seed = {}, Exec exec = Exec::parallel);

}  // namespace sparse_infer
