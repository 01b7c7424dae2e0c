#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparse_infer/dataset.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/rng.hpp"
#include "sparse_infer/solvers.hpp"
#include "sparse_infer/types.hpp"

namespace sparse_infer {

enum class PenaltyKind {
    lasso_x_independent,       // 2 c sigma sqrt(n) Phi^{-1}(1 - gamma/2p)
    lasso_x_dependent,         // 2 c sigma Lambda(1 - gamma | X)
    sqrt_lasso_x_independent,  // c sqrt(n) Phi^{-1}(1 - gamma/2p)
    sqrt_lasso_x_dependent,    // c Lambda~(1 - gamma | X)
    cross_validation,
};

std::string to_string(PenaltyKind k);

struct PenaltyRule {
    PenaltyKind kind = PenaltyKind::sqrt_lasso_x_dependent;
    double c = 1.1;
    double gamma = 0.05;
    Index num_sims = 1000;
    Index folds = 5;

    /// Throws InputError unless c > 1, 0 < gamma < 1, num_sims >= 100 for
    /// X-dependent kinds and folds >= 2 for cross-validation.
    void validate() const;
    [[nodiscard]] bool sqrt_criterion() const;
    [[nodiscard]] bool x_dependent() const;
};

/// Standard normal quantile function.
double normal_quantile(double prob);

/// Order statistic ceil(N * level) (1-based) of the draws; never below the
/// exact empirical level-quantile.
double upper_empirical_quantile(const Vector& draws, double level);

/// Monte Carlo standard error of the level-quantile of the draws, from the
/// order statistics one binomial standard deviation either side.
double quantile_standard_error(const Vector& draws, double level);

/// 2 c sigma sqrt(n) Phi^{-1}(1 - gamma / 2p).
double lambda_lasso_asymptotic(Index n, Index p, const PenaltyRule& rule, double sigma);
/// 2 c sigma sqrt(2 n log(2p / gamma)); dominates the asymptotic level.
double lambda_lasso_crude_bound(Index n, Index p, const PenaltyRule& rule, double sigma);

/// Simulated (1 - gamma)-quantiles of n ||E_n[x g]||_inf (lasso) and of
/// n ||E_n[x g]||_inf / sqrt(E_n[g^2]) (sqrt_lasso), from the same draws.
struct ScoreLevels {
    double lasso = 0.0;
    double sqrt_lasso = 0.0;
};
ScoreLevels simulate_score_levels(const Matrix& x_penalized, const PenaltyRule& rule, const SeedSpec& seed,
                                  Exec exec = Exec::parallel);

/// Columns of `d` other than its intercept.
IndexSet penalized_columns(const Dataset& d);

/// 2 c sigma Lambda(1 - gamma | X) over the penalized columns. Requires a
/// normalized dataset.
double lambda_lasso_xdep(const Dataset& d, const PenaltyRule& rule, double sigma, const SeedSpec& seed,
                         Exec exec = Exec::parallel);

/// Square-root Lasso level; the X-dependent or asymptotic form depending
/// on rule.kind. Never reads y.
double lambda_sqrt_lasso(const Dataset& d, const PenaltyRule& rule, const SeedSpec& seed,
                         Exec exec = Exec::parallel);

enum class SigmaVariant { lasso, post_lasso };

struct SigmaOptions {
    SigmaVariant variant = SigmaVariant::lasso;
    double psi = 0.1;
    double nu = 1e-6;
    Index max_iter = 15;
    /// Penalized columns added to the unpenalized ones to form I0.
    IndexSet initial_set;
};

struct SigmaTrace {
    std::vector<double> iterates;  // sigma_0, sigma_1, ...
    bool converged = false;
    double used_psi = 0.0;
};

/// True when iterates[from..] is non-decreasing or non-increasing, up to
/// `slack` per step.
bool trace_monotone(const SigmaTrace& trace, std::size_t from = 2, double slack = 1e-10);

struct SigmaResult {
    double sigma = 0.0;
    SigmaTrace trace;
    SparseFit last_fit;  // fit at the penalty from the penultimate iterate
};

/// Iterates sigma_{k+1} from a Lasso (or Post-Lasso) fit at
/// lambda = 2 c sigma_k score_level. Throws InputError "selected model too
/// large" when the post-lasso correction is undefined.
SigmaResult iterated_sigma(const Matrix& x, const Vector& y, const IndexSet& unpenalized, double score_level,
                           double c, const SigmaOptions& opts, const SolverOptions& solver = {});

/// Dataset form: normalized data, I0 = intercept, score level simulated
/// (lasso_x_dependent) or asymptotic (lasso_x_independent) per rule.kind.
SigmaResult iterated_sigma(const Dataset& d, const PenaltyRule& rule, const SigmaOptions& opts, const SeedSpec& seed,
                           Exec exec = Exec::parallel);

/// Decreasing log-spaced grid from lambda_max to lambda_max * ratio.
Vector default_lambda_grid(double lambda_max, Index count = 100, double ratio = 1e-4);
/// Smallest grid point relative to lambda_max: 1e-2 when n < p (the path
/// saturates early), 1e-4 otherwise.
double default_grid_ratio(Index n, Index p);

struct CvOptions {
    Index folds = 5;
    /// Score each grid point by the out-of-fold error of least squares on
    /// the training-fold selection instead of the Lasso fit itself.
    bool refit = false;
    /// KKT tolerance of the path fits; they only score held-out error.
    double path_tol = 1e-4;
};

struct CvResult {
    double lambda = 0.0;
    Vector grid;
    Vector cv_error;  // +inf where a fold's fit saturated
};

/// K-fold cross-validation over a Lasso path. Folds come from a seeded
/// permutation; fits along the grid are warm-started.
CvResult cross_validate(const Matrix& x, const Vector& y, const IndexSet& unpenalized, const Vector& grid,
                        const CvOptions& opts, const SeedSpec& seed);

/// Dataset form returning only the chosen penalty.
double cv_lambda(const Dataset& d, Index folds, const Vector& grid, const SeedSpec& seed);

}  // namespace sparse_infer
