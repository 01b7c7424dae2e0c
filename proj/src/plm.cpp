#include "sparse_infer/plm.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "sparse_infer/errors.hpp"

namespace sparse_infer {
namespace {

constexpr std::uint64_t kTreatmentTag = 1;
constexpr std::uint64_t kOutcomeTag = 2;
constexpr std::uint64_t kJointTag = 3;
constexpr std::uint64_t kLevelsTag = 4;

// Least squares of y1 on d and [1, x_controls], by partialling the
// controls out of both sides.
struct TreatmentOls {
    double alpha = 0.0;
    double rss = 0.0;
    double en_v2 = 0.0;
    Index columns = 0;  // rank of the control block plus one for d
};

TreatmentOls treatment_ols(const PlmProblem& prob, const IndexSet& controls) {
    const Index n = prob.n();
    Matrix c(n, 1 + static_cast<Index>(controls.size()));
    c.col(0).setOnes();
    for (std::size_t k = 0; k < controls.size(); ++k) c.col(1 + static_cast<Index>(k)) = prob.x.col(controls[k]);
    Eigen::ColPivHouseholderQR<Matrix> qr(c);
    const Index rank = qr.rank();
    if (rank + 1 >= n) {
        std::ostringstream msg;
        msg << "selected model too large: " << rank + 1 << " columns for " << n << " observations";
        throw InputError(msg.str());
    }
    const Matrix q = qr.householderQ() * Matrix::Identity(n, rank);
    const Vector v = prob.d - q * (q.transpose() * prob.d);
    const Vector yt = prob.y1 - q * (q.transpose() * prob.y1);
    const double vv = v.squaredNorm();
    if (!(vv > 1e-20 * std::max(1.0, prob.d.squaredNorm())))
        throw NumericalError("treatment has no residual variation given the selected controls");
    TreatmentOls out;
    out.alpha = v.dot(yt) / vv;
    out.rss = (yt - out.alpha * v).squaredNorm();
    out.en_v2 = vv / static_cast<double>(n);
    out.columns = rank + 1;
    return out;
}

PlmFit finish_ols(const PlmProblem& prob, PlmStrategy strategy, const IndexSet& controls) {
    const TreatmentOls ols = treatment_ols(prob, controls);
    const double n = static_cast<double>(prob.n());
    PlmFit fit;
    fit.strategy = strategy;
    fit.alpha_hat = ols.alpha;
    fit.i_union = controls;
    fit.en_vhat2 = ols.en_v2;
    // E_n[resid^2] n / (n - s - 1): s counts the intercept and controls.
    fit.sigma_zeta_hat = ols.rss / (n - static_cast<double>(ols.columns));
    fit.se = std::sqrt(fit.sigma_zeta_hat / (n * ols.en_v2));
    if (static_cast<Index>(controls.size()) + 1 > ols.columns)
        fit.warnings.emplace_back("selected controls are collinear; using the minimum-norm least-squares fit");
    return fit;
}

Dataset controls_dataset(const PlmProblem& prob, const Vector& response) {
    return with_intercept(make_dataset(response, prob.x));
}

// Selected control indices (columns of x) from a fit on [1, x].
IndexSet select_on_controls(const PlmProblem& prob, const Vector& response, const FitRequest& req,
                            const SeedSpec& seed) {
    const FeasibleFit fit = fit_feasible(controls_dataset(prob, response), req, seed);
    IndexSet out;
    for (const Index j : fit.selected) out.push_back(j - 1);
    return out;
}

struct JointFit {
    FeasibleFit fit;
    IndexSet controls;
};

// Lasso of y1 on [1, d, x] with the first two columns unpenalized.
JointFit joint_fit(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed) {
    Matrix z(prob.n(), 1 + prob.x.cols());
    z.col(0) = prob.d;
    z.rightCols(prob.x.cols()) = prob.x;
    const Dataset data = with_intercept(make_dataset(prob.y1, z));
    JointFit out{fit_feasible(data, req, seed, {1}), {}};
    for (const Index j : out.fit.selected) out.controls.push_back(j - 2);
    return out;
}

PlmFit from_joint(const PlmProblem& prob, const JointFit& jf, bool refit) {
    PlmFit fit = finish_ols(prob, refit ? PlmStrategy::post_lasso : PlmStrategy::lasso, jf.controls);
    fit.i2 = jf.controls;
    if (!refit) fit.alpha_hat = jf.fit.beta[1];
    return fit;
}

PlmFit from_selections(const PlmProblem& prob, const IndexSet& i1, const IndexSet& i2) {
    IndexSet uni = set_union(set_union(i1, i2), prob.amelioration);
    PlmFit fit = finish_ols(prob, PlmStrategy::double_selection, uni);
    fit.i1 = i1;
    fit.i2 = i2;
    const auto big = std::max<std::size_t>({1, i1.size(), i2.size()});
    if (prob.amelioration.size() > big) {
        std::ostringstream msg;
        msg << "amelioration set (" << prob.amelioration.size()
            << " controls) is larger than both selections; the variance approximation may be poor";
        fit.warnings.push_back(msg.str());
    }
    return fit;
}

// Shares one simulated penalty level across the regressions on x.
FitRequest with_levels(const PlmProblem& prob, FitRequest req, const SeedSpec& seed) {
    if (req.rule.x_dependent() && !req.levels) {
        req.levels = design_score_levels(controls_dataset(prob, prob.y1), req.rule, seed.child(kLevelsTag), {},
                                         req.exec);
    }
    return req;
}

}  // namespace

void PlmProblem::validate() const {
    const Index n = y1.size();
    if (n < 3) throw InputError("need at least 3 observations");
    if (d.size() != n || x.rows() != n) throw InputError("PLM inputs have mismatched lengths");
    if (x.cols() < 1) throw InputError("need at least one control");
    if (!y1.allFinite() || !d.allFinite() || !x.allFinite()) throw InputError("non-finite entry in PLM data");
    for (const Index j : amelioration) {
        if (j < 0 || j >= x.cols()) throw InputError("amelioration index out of range");
    }
    if (!control_names.empty() && static_cast<Index>(control_names.size()) != x.cols())
        throw InputError("control name count does not match");
}

std::string PlmProblem::control_name(Index j) const {
    if (j >= 0 && static_cast<std::size_t>(j) < control_names.size()) return control_names[static_cast<std::size_t>(j)];
    return "x" + std::to_string(j + 1);
}

std::string to_string(PlmStrategy s) {
    switch (s) {
        case PlmStrategy::lasso: return "lasso";
        case PlmStrategy::post_lasso: return "post_lasso";
        case PlmStrategy::indirect: return "indirect_post_lasso";
        case PlmStrategy::double_selection: return "double_selection";
        case PlmStrategy::fixed_controls: return "fixed_controls";
    }
    return "unknown";
}

PlmFit plm_strategy_i(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed) {
    prob.validate();
    return from_joint(prob, joint_fit(prob, with_levels(prob, req, seed), seed.child(kJointTag)), false);
}

PlmFit plm_strategy_ii(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed) {
    prob.validate();
    return from_joint(prob, joint_fit(prob, with_levels(prob, req, seed), seed.child(kJointTag)), true);
}

PlmFit plm_strategy_iii(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed) {
    prob.validate();
    const IndexSet i1 = select_on_controls(prob, prob.d, with_levels(prob, req, seed), seed.child(kTreatmentTag));
    PlmFit fit = finish_ols(prob, PlmStrategy::indirect, i1);
    fit.i1 = i1;
    return fit;
}

PlmFit plm_double(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed) {
    prob.validate();
    const FitRequest shared = with_levels(prob, req, seed);
    const IndexSet i1 = select_on_controls(prob, prob.d, shared, seed.child(kTreatmentTag));
    const IndexSet i2 = select_on_controls(prob, prob.y1, shared, seed.child(kOutcomeTag));
    return from_selections(prob, i1, i2);
}

PlmFit plm_fixed_controls(const PlmProblem& prob, const IndexSet& controls) {
    prob.validate();
    IndexSet c = controls;
    canonicalize(c);
    for (const Index j : c) {
        if (j < 0 || j >= prob.x.cols()) throw InputError("control index out of range");
    }
    return finish_ols(prob, PlmStrategy::fixed_controls, c);
}

PlmAll plm_all(const PlmProblem& prob, const FitRequest& req, const SeedSpec& seed) {
    prob.validate();
    const FitRequest shared = with_levels(prob, req, seed);
    const JointFit jf = joint_fit(prob, shared, seed.child(kJointTag));
    const IndexSet i1 = select_on_controls(prob, prob.d, shared, seed.child(kTreatmentTag));
    const IndexSet i2 = select_on_controls(prob, prob.y1, shared, seed.child(kOutcomeTag));
    PlmAll out;
    out.lasso = from_joint(prob, jf, false);
    out.post_lasso = from_joint(prob, jf, true);
    out.indirect = finish_ols(prob, PlmStrategy::indirect, i1);
    out.indirect.i1 = i1;
    out.double_selection = from_selections(prob, i1, i2);
    return out;
}

}  // namespace sparse_infer
