#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparse_infer/dataset.hpp"
#include "sparse_infer/penalty.hpp"
#include "sparse_infer/solvers.hpp"

namespace sparse_infer {

/// A complete data-driven estimator: penalty rule, noise handling and
/// optional least-squares refit on the selected columns.
struct FitRequest {
    PenaltyRule rule;
    bool post = false;
    /// Known noise level for Lasso rules; iterated estimate when absent.
    std::optional<double> sigma;
    SigmaOptions sigma_opts;
    /// Cross-validation scores post-OLS predictions when `post` is set.
    Index cv_grid_size = 100;
    /// Score levels already simulated for this design (saves repeating
    /// the simulation across estimators sharing one X).
    std::optional<ScoreLevels> levels;
    SolverOptions solver;
    Exec exec = Exec::parallel;
};

struct FeasibleFit {
    Vector beta;        // raw column scale, length p
    IndexSet selected;  // penalized columns with nonzero penalized coefficient
    Vector fitted;      // x * beta
    double lambda = 0.0;
    std::optional<double> sigma_hat;
    std::optional<SigmaTrace> sigma_trace;
    SparseFit penalized;  // normalized scale
    std::vector<std::string> warnings;
};

/// Unpenalized columns are the intercept of `d` plus `extra_unpenalized`.
/// The penalized fit runs on normalized columns; coefficients are mapped
/// back to the raw scale.
FeasibleFit fit_feasible(const Dataset& d, const FitRequest& req, const SeedSpec& seed,
                         const IndexSet& extra_unpenalized = {});

/// Penalized fit (plus optional refit) of normalize(d) at a fixed penalty.
/// `sigma_hat`, `sigma_trace` are left empty.
FeasibleFit fit_at_lambda(const Dataset& d, double lambda, SolverMethod method, bool post,
                          const IndexSet& extra_unpenalized = {}, const SolverOptions& solver = {});

/// Score levels over the penalized columns of normalize(d).
ScoreLevels design_score_levels(const Dataset& d, const PenaltyRule& rule, const SeedSpec& seed,
                                const IndexSet& extra_unpenalized = {}, Exec exec = Exec::parallel);

}  // namespace sparse_infer
