#pragma once

#include <string>
#include <vector>

#include "sparse_infer/feasible.hpp"
#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

namespace sparse_infer {

/// y1 = d alpha + g(z) + zeta, d = m(z) + v, with technical controls x.
struct PlmProblem {
    Vector y1;
    Vector d;
    Matrix x;
    IndexSet amelioration;  // controls always included by double selection
    std::vector<std::string> control_names;
    std::string treatment_name = "d";

    [[nodiscard]] Index n() const { return y1.size(); }
    void validate() const;
    [[nodiscard]] std::string control_name(Index j) const;
};

enum class PlmStrategy { lasso, post_lasso, indirect, double_selection, fixed_controls };

std::string to_string(PlmStrategy s);

struct PlmFit {
    PlmStrategy strategy = PlmStrategy::double_selection;
    double alpha_hat = 0.0;
    double se = 0.0;
    IndexSet i1;       // controls selected for the treatment equation
    IndexSet i2;       // controls selected for the outcome equation
    IndexSet i_union;  // controls in the final least-squares fit
    double sigma_zeta_hat = 0.0;
    double en_vhat2 = 0.0;  // E_n of the treatment residual on the controls
    std::vector<std::string> warnings;
};

/// (i) Feasible Lasso of y1 on [1, d, x] with d and the intercept
/// unpenalized. The standard error is the conventional least-squares one
/// on the selected set, which ignores the shrinkage.
PlmFit plm_strategy_i(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed);
/// (ii) Same selection, least-squares refit.
PlmFit plm_strategy_ii(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed);
/// (iii) Controls selected by a Lasso of d on x; least squares of y1 on d
/// and those controls.
PlmFit plm_strategy_iii(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed);
/// Double selection: least squares of y1 on d and the union of the two
/// selections, the amelioration set and the intercept. Variance
/// sigma2 / (n E_n[v^2]) with sigma2 = E_n[resid^2] n / (n - s - 1).
PlmFit plm_double(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed);

/// Least squares of y1 on d, the intercept and the given controls, with
/// the double-selection variance formula.
PlmFit plm_fixed_controls(const PlmProblem& prob, const IndexSet& controls);

struct PlmAll {
    PlmFit lasso;
    PlmFit post_lasso;
    PlmFit indirect;
    PlmFit double_selection;
};

/// All four strategies, sharing selection runs and the simulated penalty
/// level (the penalized columns are x in every regression).
PlmAll plm_all(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed);

}  // namespace sparse_infer
