#include "sparse_infer/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "sparse_infer/errors.hpp"

namespace sparse_infer {
namespace {

void require_normalized(const Dataset& d) {
    if (!d.normalized) throw InputError("dataset must be normalized (E_n[x_ij^2] = 1)");
}

Matrix take_columns(const Matrix& x, const IndexSet& cols) {
    Matrix out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = x.col(cols[c]);
    return out;
}

double rms(const Vector& r) { return std::sqrt(r.squaredNorm() / static_cast<double>(r.size())); }

}  // namespace

std::string to_string(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::lasso_x_independent: return "lasso_x_independent";
        case PenaltyKind::lasso_x_dependent: return "lasso_x_dependent";
        case PenaltyKind::sqrt_lasso_x_independent: return "sqrt_lasso_x_independent";
        case PenaltyKind::sqrt_lasso_x_dependent: return "sqrt_lasso_x_dependent";
        case PenaltyKind::cross_validation: return "cross_validation";
    }
    return "unknown";
}

void PenaltyRule::validate() const {
    if (!(c > 1.0) || !std::isfinite(c)) throw InputError("penalty constant c must be > 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
    if (x_dependent() && num_sims < 100) throw InputError("num_sims must be >= 100 for X-dependent penalties");
    if (kind == PenaltyKind::cross_validation && folds < 2) throw InputError("folds must be >= 2");
}

bool PenaltyRule::sqrt_criterion() const {
    return kind == PenaltyKind::sqrt_lasso_x_independent || kind == PenaltyKind::sqrt_lasso_x_dependent;
}

bool PenaltyRule::x_dependent() const {
    return kind == PenaltyKind::lasso_x_dependent || kind == PenaltyKind::sqrt_lasso_x_dependent;
}

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw InputError("normal quantile needs a probability in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double upper_empirical_quantile(const Vector& draws, double level) {
    if (draws.size() == 0) throw InputError("no draws for quantile");
    std::vector<double> v(draws.data(), draws.data() + draws.size());
    const auto count = static_cast<double>(v.size());
    // Guard against level * count landing a hair above an integer.
    auto rank = static_cast<std::size_t>(std::ceil(level * count - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
    return v[rank - 1];
}

double quantile_standard_error(const Vector& draws, double level) {
    if (draws.size() < 2) throw InputError("need at least two draws");
    std::vector<double> v(draws.data(), draws.data() + draws.size());
    std::sort(v.begin(), v.end());
    const auto count = static_cast<double>(v.size());
    const double spread = std::sqrt(count * level * (1.0 - level));
    const auto at = [&](double rank) {
        const auto r = static_cast<std::ptrdiff_t>(std::clamp(rank, 1.0, count));
        return v[static_cast<std::size_t>(r - 1)];
    };
    return 0.5 * (at(std::ceil(count * level + spread)) - at(std::floor(count * level - spread)));
}

double lambda_lasso_asymptotic(Index n, Index p, const PenaltyRule& rule, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be > 0");
    if (n < 1 || p < 1) throw InputError("n and p must be >= 1");
    const double q = normal_quantile(1.0 - rule.gamma / (2.0 * static_cast<double>(p)));
    return 2.0 * rule.c * sigma * std::sqrt(static_cast<double>(n)) * q;
}

double lambda_lasso_crude_bound(Index n, Index p, const PenaltyRule& rule, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be > 0");
    if (n < 1 || p < 1) throw InputError("n and p must be >= 1");
    const double nd = static_cast<double>(n);
    return 2.0 * rule.c * sigma * std::sqrt(2.0 * nd * std::log(2.0 * static_cast<double>(p) / rule.gamma));
}

ScoreLevels simulate_score_levels(const Matrix& x_penalized, const PenaltyRule& rule, const SeedSpec& seed,
                                  Exec exec) {
    if (x_penalized.cols() < 1) throw InputError("no penalized columns");
    if (rule.num_sims < 1) throw InputError("num_sims must be >= 1");
    const auto draws = score_maxima(x_penalized, seed, rule.num_sims, exec);
    const Vector self_normalized = draws.max_abs.cwiseQuotient(draws.g_rms);
    return {upper_empirical_quantile(draws.max_abs, 1.0 - rule.gamma),
            upper_empirical_quantile(self_normalized, 1.0 - rule.gamma)};
}

IndexSet penalized_columns(const Dataset& d) {
    IndexSet cols;
    for (Index j = 0; j < d.p(); ++j) {
        if (!d.intercept || *d.intercept != j) cols.push_back(j);
    }
    if (cols.empty()) throw InputError("no penalized columns");
    return cols;
}

double lambda_lasso_xdep(const Dataset& d, const PenaltyRule& rule, double sigma, const SeedSpec& seed, Exec exec) {
    require_normalized(d);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be > 0");
    rule.validate();
    const auto levels = simulate_score_levels(take_columns(d.x, penalized_columns(d)), rule, seed, exec);
    return 2.0 * rule.c * sigma * levels.lasso;
}

double lambda_sqrt_lasso(const Dataset& d, const PenaltyRule& rule, const SeedSpec& seed, Exec exec) {
    require_normalized(d);
    rule.validate();
    const IndexSet cols = penalized_columns(d);
    if (rule.kind == PenaltyKind::sqrt_lasso_x_dependent) {
        return rule.c * simulate_score_levels(take_columns(d.x, cols), rule, seed, exec).sqrt_lasso;
    }
    const auto p = static_cast<double>(cols.size());
    return rule.c * std::sqrt(static_cast<double>(d.n())) * normal_quantile(1.0 - rule.gamma / (2.0 * p));
}

bool trace_monotone(const SigmaTrace& trace, std::size_t from, double slack) {
    bool up = true;
    bool down = true;
    const auto& v = trace.iterates;
    for (std::size_t k = from + 1; k < v.size(); ++k) {
        if (v[k] < v[k - 1] - slack) up = false;
        if (v[k] > v[k - 1] + slack) down = false;
    }
    return up || down;
}

SigmaResult iterated_sigma(const Matrix& x, const Vector& y, const IndexSet& unpenalized, double score_level,
                           double c, const SigmaOptions& opts, const SolverOptions& solver) {
    if (!(opts.psi > 0.0)) throw InputError("psi must be > 0");
    if (!(opts.nu >= 0.0)) throw InputError("nu must be >= 0");
    if (opts.max_iter < 1) throw InputError("max_iter must be >= 1");
    if (!(score_level > 0.0)) throw InputError("score level must be > 0");
    const double n = static_cast<double>(x.rows());

    const OlsFit initial = post_ols(x, y, opts.initial_set, unpenalized);
    SigmaResult out;
    out.trace.used_psi = opts.psi;
    double sigma = opts.psi * rms(initial.residuals);
    if (!(sigma > 0.0)) throw NumericalError("initial noise estimate is zero (y fitted exactly by I0)");
    out.trace.iterates.push_back(sigma);

    SolverOptions so = solver;
    for (Index k = 0;; ++k) {
        const double lambda = 2.0 * c * sigma * score_level;
        out.last_fit = fit_lasso(x, y, lambda, unpenalized, so);
        so.warm_start = out.last_fit.beta;
        double next = 0.0;
        if (opts.variant == SigmaVariant::lasso) {
            next = rms(y - x * out.last_fit.beta);
        } else {
            const OlsFit refit = post_ols(x, y, out.last_fit.support, unpenalized);
            const auto s = static_cast<double>(refit.columns.size());
            if (s >= n) throw InputError("selected model too large for the degrees-of-freedom correction");
            next = std::sqrt(refit.residuals.squaredNorm() / (n - s));
        }
        if (!(next > 0.0)) throw NumericalError("noise estimate collapsed to zero");
        out.trace.iterates.push_back(next);
        const bool done = std::abs(next - sigma) <= opts.nu;
        sigma = next;
        if (done) {
            out.trace.converged = true;
            break;
        }
        if (k + 1 > opts.max_iter) break;
    }
    out.sigma = sigma;
    return out;
}

SigmaResult iterated_sigma(const Dataset& d, const PenaltyRule& rule, const SigmaOptions& opts, const SeedSpec& seed,
                           Exec exec) {
    require_normalized(d);
    rule.validate();
    const IndexSet pen = penalized_columns(d);
    double level = 0.0;
    if (rule.kind == PenaltyKind::lasso_x_dependent) {
        level = simulate_score_levels(take_columns(d.x, pen), rule, seed, exec).lasso;
    } else if (rule.kind == PenaltyKind::lasso_x_independent) {
        level = std::sqrt(static_cast<double>(d.n())) *
                normal_quantile(1.0 - rule.gamma / (2.0 * static_cast<double>(pen.size())));
    } else {
        throw InputError("iterated sigma needs a Lasso penalty rule");
    }
    const IndexSet unpen = d.intercept ? IndexSet{*d.intercept} : IndexSet{};
    return iterated_sigma(d.x, d.y, unpen, level, rule.c, opts);
}

Vector default_lambda_grid(double lambda_max, Index count, double ratio) {
    if (!(lambda_max > 0.0)) throw InputError("lambda_max must be > 0");
    if (count < 1) throw InputError("grid needs at least one point");
    if (count == 1) return Vector::Constant(1, lambda_max);
    Vector grid(count);
    const double step = std::log(ratio) / static_cast<double>(count - 1);
    for (Index k = 0; k < count; ++k) grid[k] = lambda_max * std::exp(step * static_cast<double>(k));
    return grid;
}

// Training fits explaining more than 99.9% of the centered sum of squares
// end the path.
constexpr double kSaturatedFraction = 1e-3;

double default_grid_ratio(Index n, Index p) { return n < p ? 1e-2 : 1e-4; }

CvResult cross_validate(const Matrix& x, const Vector& y, const IndexSet& unpenalized, const Vector& grid,
                        const CvOptions& opts, const SeedSpec& seed) {
    const Index n = x.rows();
    const Index k = opts.folds;
    if (k < 2 || k > n) throw InputError("folds must lie in [2, n]");
    if (n / k < 2) throw InputError("every fold needs at least 2 observations");
    if (grid.size() < 1) throw InputError("empty lambda grid");
    for (Index g = 0; g < grid.size(); ++g) {
        if (!(grid[g] > 0.0)) throw InputError("lambda grid must be positive");
        if (g > 0 && grid[g] > grid[g - 1]) throw InputError("lambda grid must be sorted in decreasing order");
    }

    const auto perm = random_permutation(seed, n);
    std::vector<Index> fold_of(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i % k;

    CvResult out;
    out.grid = grid;
    out.cv_error = Vector::Zero(grid.size());
    for (Index f = 0; f < k; ++f) {
        std::vector<Index> train;
        std::vector<Index> test;
        for (Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        const auto nt = static_cast<Index>(train.size());
        Matrix xt(nt, x.cols());
        Vector yt(nt);
        for (Index r = 0; r < nt; ++r) {
            xt.row(r) = x.row(train[static_cast<std::size_t>(r)]);
            yt[r] = y[train[static_cast<std::size_t>(r)]];
        }
        Matrix xv(static_cast<Index>(test.size()), x.cols());
        Vector yv(xv.rows());
        for (Index r = 0; r < xv.rows(); ++r) {
            xv.row(r) = x.row(test[static_cast<std::size_t>(r)]);
            yv[r] = y[test[static_cast<std::size_t>(r)]];
        }

        const double tss = (yt.array() - yt.mean()).square().sum();
        SolverOptions so;
        so.tol = opts.path_tol;
        bool saturated = false;
        for (Index g = 0; g < grid.size(); ++g) {
            if (saturated) {
                out.cv_error[g] = std::numeric_limits<double>::infinity();
                continue;
            }
            const SparseFit fit = fit_lasso(xt, yt, grid[g], unpenalized, so);
            so.warm_start = fit.beta;
            const IndexSet model = set_union(fit.support, unpenalized);
            // Past this point the training fit (nearly) interpolates and the
            // path carries no further information.
            const double rss = (yt - xt * fit.beta).squaredNorm();
            if (static_cast<Index>(model.size()) >= nt - 1 || rss <= kSaturatedFraction * tss) saturated = true;
            Vector beta = fit.beta;
            if (opts.refit) {
                if (saturated) {
                    out.cv_error[g] = std::numeric_limits<double>::infinity();
                    continue;
                }
                beta = post_ols(xt, yt, fit.support, unpenalized).beta;
            }
            out.cv_error[g] += (yv - xv * beta).squaredNorm() / static_cast<double>(n);
        }
    }
    Index best = 0;
    for (Index g = 1; g < grid.size(); ++g) {
        if (out.cv_error[g] < out.cv_error[best]) best = g;
    }
    out.lambda = grid[best];
    return out;
}

double cv_lambda(const Dataset& d, Index folds, const Vector& grid, const SeedSpec& seed) {
    const IndexSet unpen = d.intercept ? IndexSet{*d.intercept} : IndexSet{};
    CvOptions opts;
    opts.folds = folds;
    return cross_validate(d.x, d.y, unpen, grid, opts, seed).lambda;
}

}  // namespace sparse_infer
