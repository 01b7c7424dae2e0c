#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparse_infer/feasible.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

namespace sparse_infer {

/// y1 = alpha1 y2 + w' alpha2 + zeta, with instruments x for y2.
struct IVProblem {
    Vector y1;
    Vector y2;
    Matrix w;  // controls, including the intercept column
    Matrix x;  // technical instruments
    std::vector<std::string> instrument_names;
    std::vector<std::string> control_names;

    [[nodiscard]] Index n() const { return y1.size(); }
    /// Throws InputError on length mismatch, non-finite data or a singular
    /// control Gram matrix.
    void validate() const;
    [[nodiscard]] std::string instrument_name(Index j) const;
};

struct FirstStageOptions {
    FitRequest request;
    /// Include the instrument most correlated with y2 in the initial
    /// noise-level regression of the iterated rule.
    bool start_from_top_instrument = false;
    double decay = 0.9;
    int max_decays = 200;
};

struct FirstStage {
    Vector fhat;                    // fitted y2
    IndexSet selected;              // instrument indices (columns of x)
    bool initially_empty = false;   // no instrument at the data-driven penalty
    bool fallback_used = false;     // penalty lowered to force a selection
    int decays = 0;
    double lambda = 0.0;            // penalty finally used
    std::optional<double> sigma_hat;
    std::vector<std::string> warnings;
};

/// Regression of y2 on [w, x] with w unpenalized. When nothing is selected
/// the penalty is multiplied by `decay` until an instrument enters.
FirstStage fit_first_stage(const IVProblem& prob, const FirstStageOptions& opts, const SeedSpec& seed);

struct IVFit {
    Vector alpha_hat;  // (alpha1, alpha2')
    /// sqrt(diag(sigma2 Q^{-1} / n)) with Q = E_n[A A'] and sigma2 from the
    /// residual y1 - A' alpha.
    Vector se;
    /// Same, with sigma2 from the structural residual y1 - d' alpha; for a
    /// least-squares first stage this is the conventional 2SLS error.
    Vector se_conventional;
    double sigma_zeta_hat = 0.0;
    double sigma_zeta_conventional = 0.0;
    IndexSet selected_instruments;
    bool initially_empty = false;
    bool fallback_used = false;
    double k_class = 1.0;
    std::vector<std::string> warnings;
};

enum class SecondStage { twosls, fuller };

/// IV with estimated optimal instrument A = (fhat, w). With the fuller
/// second stage the k-class estimator runs on the selected instruments.
IVFit fit_iv_lasso(const IVProblem& prob, const FirstStageOptions& opts, SecondStage second, const SeedSpec& seed,
                   double fuller_a = 1.0);

/// Two-stage least squares on the given instrument columns plus w.
IVFit fit_2sls(const IVProblem& prob, const IndexSet& instruments);

/// 2SLS on all instruments; when p + k_w >= n a random subset of
/// n - k_w - 1 instruments is used (seeded).
IVFit fit_2sls_all(const IVProblem& prob, const SeedSpec& seed);
IndexSet all_instruments_subset(const IVProblem& prob, const SeedSpec& seed);

/// Fuller k-class: k = k_LIML - a / (n - K), K = |instruments| + k_w.
/// a = 0 gives LIML. Conventional k-class standard errors.
IVFit fit_fuller(const IVProblem& prob, const IndexSet& instruments, double a = 1.0);

/// Accepted grid points of a confidence region and their hull.
struct Region {
    std::vector<double> accepted;
    bool empty = true;
    double lo = 0.0;
    double hi = 0.0;
    bool unbounded_below = false;  // first grid point accepted
    bool unbounded_above = false;  // last grid point accepted
};

Region make_region(const Vector& grid, const std::vector<bool>& accept);

struct SupScoreOptions {
    double gamma = 0.05;
    double c = 1.1;
    Index num_sims = 1000;
    bool simulate = true;  // skip the simulated critical value when false
    Exec exec = Exec::parallel;
};

struct SupScoreResult {
    Vector grid;
    Vector statistic;
    double critical_finite = 0.0;      // NaN when not simulated
    double critical_asymptotic = 0.0;  // c sqrt(n) Phi^{-1}(1 - gamma/2p)
    Region ci_finite;
    Region ci_asymptotic;
    std::vector<std::string> warnings;
};

/// Data with w partialled out and instrument columns rescaled to unit
/// second moment. Instruments lying in the span of w are dropped.
struct Partialled {
    Vector y1;
    Vector y2;
    Matrix x;
    Matrix w_basis;  // orthonormal basis of span(w)
    IndexSet kept;   // original instrument index of each column of x
    std::vector<std::string> warnings;
};

Partialled partial_out(const IVProblem& prob);

/// max_j n |E_n[e x_j]| / sqrt(E_n[e^2 x_j^2]) for e = y1 - a y2; columns
/// with a zero denominator are skipped.
double sup_score_statistic(const Partialled& part, double a);

SupScoreResult sup_score(const IVProblem& prob, const Vector& grid, const SupScoreOptions& opts,
                         const SeedSpec& seed);

/// Grid indices where the loading-weighted Lasso of y1~ - a y2~ on x~ at
/// lambda = 2 x critical_finite is identically zero.
IndexSet inverse_lasso_region(const IVProblem& prob, const Vector& grid, const SupScoreOptions& opts,
                              const SeedSpec& seed);

/// `count` equally spaced points from lo to hi.
Vector linear_grid(double lo, double hi, Index count);

/// 401 points spanning the all-instrument 2SLS estimate +/- 10 standard
/// errors.
Vector default_sup_score_grid(const IVProblem& prob, const SeedSpec& seed);

}  // namespace sparse_infer
