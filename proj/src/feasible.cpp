#include "sparse_infer/feasible.hpp"

#include <cmath>

#include "sparse_infer/errors.hpp"

namespace sparse_infer {
namespace {

// Sub-stream tags within one fit.
constexpr std::uint64_t kScoreTag = 1;
constexpr std::uint64_t kFoldTag = 2;

IndexSet unpenalized_of(const Dataset& d, const IndexSet& extra) {
    IndexSet u = extra;
    if (d.intercept) u.push_back(*d.intercept);
    canonicalize(u);
    for (const Index j : u) {
        if (j < 0 || j >= d.p()) throw InputError("unpenalized index out of range");
    }
    return u;
}

Matrix penalized_block(const Matrix& x, const IndexSet& unpenalized) {
    const IndexSet pen = complement(unpenalized, x.cols());
    if (pen.empty()) throw InputError("no penalized columns");
    Matrix out(x.rows(), static_cast<Index>(pen.size()));
    for (std::size_t c = 0; c < pen.size(); ++c) out.col(static_cast<Index>(c)) = x.col(pen[c]);
    return out;
}

double asymptotic_level(Index n, Index p_pen, double gamma) {
    return std::sqrt(static_cast<double>(n)) * normal_quantile(1.0 - gamma / (2.0 * static_cast<double>(p_pen)));
}

// Selection, optional refit and mapping back to the raw column scale.
void finish(const Dataset& nd, const IndexSet& unpen, bool post, SparseFit fit, FeasibleFit& out) {
    out.selected.clear();
    for (const Index j : fit.support) {
        if (!contains(unpen, j)) out.selected.push_back(j);
    }
    Vector beta_n = fit.beta;
    if (post) {
        OlsFit refit = post_ols(nd.x, nd.y, out.selected, unpen);
        beta_n = refit.beta;
        out.warnings = std::move(refit.warnings);
    }
    out.beta = denormalize_coefficients(nd, beta_n);
    out.fitted = nd.x * beta_n;
    out.penalized = std::move(fit);
}

}  // namespace

ScoreLevels design_score_levels(const Dataset& d, const PenaltyRule& rule, const SeedSpec& seed,
                                const IndexSet& extra_unpenalized, Exec exec) {
    const Dataset nd = normalize(d);
    return simulate_score_levels(penalized_block(nd.x, unpenalized_of(nd, extra_unpenalized)), rule,
                                 seed.child(kScoreTag), exec);
}

FeasibleFit fit_feasible(const Dataset& d, const FitRequest& req, const SeedSpec& seed,
                         const IndexSet& extra_unpenalized) {
    req.rule.validate();
    const Dataset nd = normalize(d);
    const IndexSet unpen = unpenalized_of(nd, extra_unpenalized);
    const Index p_pen = nd.p() - static_cast<Index>(unpen.size());
    if (p_pen < 1) throw InputError("no penalized columns");
    const PenaltyKind kind = req.rule.kind;

    auto levels = [&]() -> ScoreLevels {
        if (req.levels) return *req.levels;
        return simulate_score_levels(penalized_block(nd.x, unpen), req.rule, seed.child(kScoreTag), req.exec);
    };

    FeasibleFit out;
    SparseFit fit;
    switch (kind) {
        case PenaltyKind::sqrt_lasso_x_dependent:
        case PenaltyKind::sqrt_lasso_x_independent: {
            if (req.sigma) throw InputError("the square-root Lasso penalty does not take a noise level");
            const double level = kind == PenaltyKind::sqrt_lasso_x_dependent
                                     ? levels().sqrt_lasso
                                     : asymptotic_level(nd.n(), p_pen, req.rule.gamma);
            out.lambda = req.rule.c * level;
            fit = fit_sqrt_lasso(nd.x, nd.y, out.lambda, unpen, req.solver);
            break;
        }
        case PenaltyKind::lasso_x_dependent:
        case PenaltyKind::lasso_x_independent: {
            const double level = kind == PenaltyKind::lasso_x_dependent
                                     ? levels().lasso
                                     : asymptotic_level(nd.n(), p_pen, req.rule.gamma);
            double sigma = 0.0;
            SolverOptions so = req.solver;
            if (req.sigma) {
                if (!(*req.sigma > 0.0)) throw InputError("sigma must be > 0");
                sigma = *req.sigma;
            } else {
                const SigmaResult it = iterated_sigma(nd.x, nd.y, unpen, level, req.rule.c, req.sigma_opts, req.solver);
                sigma = it.sigma;
                out.sigma_trace = it.trace;
                so.warm_start = it.last_fit.beta;
            }
            out.sigma_hat = sigma;
            out.lambda = 2.0 * req.rule.c * sigma * level;
            fit = fit_lasso(nd.x, nd.y, out.lambda, unpen, so);
            break;
        }
        case PenaltyKind::cross_validation: {
            if (req.sigma) throw InputError("cross-validation does not take a noise level");
            const double top = lasso_lambda_max(nd.x, nd.y, unpen);
            if (!(top > 0.0)) throw NumericalError("response has no penalized signal (lambda_max = 0)");
            CvOptions cv;
            cv.folds = req.rule.folds;
            cv.refit = req.post;
            const auto res =
                cross_validate(nd.x, nd.y, unpen, default_lambda_grid(top, req.cv_grid_size, default_grid_ratio(nd.n(), nd.p())), cv, seed.child(kFoldTag));
            out.lambda = res.lambda;
            fit = fit_lasso(nd.x, nd.y, out.lambda, unpen, req.solver);
            break;
        }
    }

    finish(nd, unpen, req.post, std::move(fit), out);
    return out;
}

FeasibleFit fit_at_lambda(const Dataset& d, double lambda, SolverMethod method, bool post,
                          const IndexSet& extra_unpenalized, const SolverOptions& solver) {
    const Dataset nd = normalize(d);
    const IndexSet unpen = unpenalized_of(nd, extra_unpenalized);
    FeasibleFit out;
    out.lambda = lambda;
    SparseFit fit = method == SolverMethod::lasso ? fit_lasso(nd.x, nd.y, lambda, unpen, solver)
                                                  : fit_sqrt_lasso(nd.x, nd.y, lambda, unpen, solver);
    finish(nd, unpen, post, std::move(fit), out);
    return out;
}

}  // namespace sparse_infer
