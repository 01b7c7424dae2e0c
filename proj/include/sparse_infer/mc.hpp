#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparse_infer/dataset.hpp"
#include "sparse_infer/iv.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/plm.hpp"
#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

namespace sparse_infer {

enum class DgpKind { mean_regression, iv_exponential, iv_nosignal, plm };

std::string to_string(DgpKind k);

struct DgpSpec {
    DgpKind kind = DgpKind::mean_regression;
    Index n = 100;
    /// Columns of x including the intercept (mean regression), number of
    /// instruments (IV) or number of controls (partially linear model).
    Index p = 500;
    double rho = 0.5;
    double sigma = 1.0;  // noise level of the mean regression
    std::optional<double> f_star;
    double corr_zeta_v = 0.3;
    Index reps = 1000;
    SeedSpec seed;

    void validate() const;
};

/// Regression y = x'beta0 + sigma eps with x = (1, z), z ~ AR(rho).
DgpSpec mean_regression_spec(double sigma, Index n = 100);
/// Exponential first stage with the given strength, or no signal when
/// `f_star` is empty.
DgpSpec iv_spec(Index n, std::optional<double> f_star);
DgpSpec plm_spec();

/// n x p Gaussian rows with corr(x_j, x_k) = rho^|j-k|, unit variances.
Matrix ar_gaussian(Rng& rng, Index n, Index p, double rho);
Matrix ar_covariance(Index p, double rho);

/// (1, 1, 1/2, 1/3, 1/4, 1/5, 0, ...) of length p.
Vector mean_regression_coefficients(Index p);
/// 0.7^(h-1), h = 1..p.
Vector iv_first_stage_coefficients(Index p);
/// n pi' Sigma pi / (F* pi' pi).
double iv_first_stage_variance(Index n, const Vector& pi, double rho, double f_star);
/// Two blocks (1, 1/2, ..., 1/5) starting at controls 1 and 11.
Vector plm_outcome_coefficients(Index p);
/// (1, 1/2, ..., 1/10, 0, ...).
Vector plm_treatment_coefficients(Index p);

struct MeanRegressionDraw {
    Dataset data;  // intercept in column 0
    Vector beta0;
    IndexSet support;
};

struct IvDraw {
    IVProblem problem;  // w = intercept
    double alpha0 = 1.0;
    Vector pi;
};

struct PlmDraw {
    PlmProblem problem;
    double alpha0 = 1.0;
    Vector beta0;
    Vector eta0;
    Vector v;  // treatment disturbance, for the infeasible oracle
};

MeanRegressionDraw gen_mean_regression(const DgpSpec& spec, Index rep);
IvDraw gen_iv(const DgpSpec& spec, Index rep);
PlmDraw gen_plm(const DgpSpec& spec, Index rep);

enum class Estimator {
    // mean regression
    lasso_known_sigma,
    post_lasso_known_sigma,
    sqrt_lasso,
    post_sqrt_lasso,
    iterated_lasso,
    post_iterated_lasso,
    cv_lasso,
    cv_post_lasso,
    oracle,
    // instrumental variables
    tsls_all,
    fuller_all,
    iv_lasso,
    fuller_lasso,
    iv_lasso_cv,
    fuller_lasso_cv,
    sup_score,
    // partially linear model
    plm_lasso,
    plm_post_lasso,
    plm_indirect,
    plm_double,
    plm_double_oracle,
    plm_oracle,
};

std::string to_string(Estimator e);
bool compatible(Estimator e, DgpKind k);
std::vector<Estimator> default_estimators(DgpKind k);

struct StudyOptions {
    Index num_sims = 1000;  // draws per simulated penalty level
    Index mean_cv_folds = 5;
    Index iv_cv_folds = 10;
    Index cv_grid_size = 100;
    /// Selector for both equations of the partially linear model.
    PenaltyKind plm_penalty = PenaltyKind::sqrt_lasso_x_dependent;
    SigmaVariant plm_sigma_variant = SigmaVariant::lasso;
    /// Noise iteration of the IV first stage. The refit variant selects in
    /// about 1.5% of no-signal draws; the Lasso variant in about 0.6%.
    SigmaVariant iv_sigma_variant = SigmaVariant::post_lasso;
    /// Replication-level parallelism; kernels inside a replication are serial.
    Exec exec = Exec::parallel;
};

/// First-stage settings used by the Lasso-based IV estimators: iterated
/// X-dependent Lasso starting from the instrument most correlated with y2.
FirstStageOptions iv_first_stage_options(const StudyOptions& opts);

struct Metric {
    std::string name;
    std::optional<double> value;  // empty when not computed for this row
    std::optional<double> mc_se;
};

struct McRow {
    std::string estimator;
    std::vector<Metric> metrics;

    [[nodiscard]] const Metric* find(const std::string& name) const;
    /// Value of a computed metric; throws InputError otherwise.
    [[nodiscard]] double at(const std::string& name) const;
};

struct McBlock {
    std::string label;
    DgpSpec spec;
    std::vector<McRow> rows;

    [[nodiscard]] const McRow& row(const std::string& estimator) const;
};

struct McReport {
    std::string study;
    std::uint64_t seed = 0;
    Index reps = 0;
    std::vector<McBlock> blocks;
    std::vector<std::string> notes;

    [[nodiscard]] const McBlock& block(const std::string& label) const;
};

/// Replication r uses the stream {spec.seed.master_seed, r}. Metrics are
/// reduced in replication order, so the result does not depend on the
/// number of threads.
McBlock run_study(const DgpSpec& spec, const std::vector<Estimator>& estimators, const StudyOptions& opts = {});

/// "table2" (mean regression, two noise levels), "table4" (IV, four
/// designs at n = 100 and 500) or "plm".
McReport run_named_study(const std::string& study, Index reps, std::uint64_t seed, const StudyOptions& opts = {});

/// Rejection frequency of H0: alpha = a for each a in `alternatives`.
struct PowerCurve {
    std::vector<double> alternatives;
    std::vector<double> iv_lasso;   // conventional t-test, sup-score when nothing is selected
    std::vector<double> sup_score;  // asymptotic critical value
};

PowerCurve iv_power_curve(const DgpSpec& spec, const std::vector<double>& alternatives,
                          const StudyOptions& opts = {});

}  // namespace sparse_infer
