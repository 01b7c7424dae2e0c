#include "sparse_infer/mc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/feasible.hpp"
#include "sparse_infer/penalty.hpp"

namespace sparse_infer {
namespace {

// Sub-streams of one replication.
constexpr std::uint64_t kDataTag = 0;
constexpr std::uint64_t kLevelsTag = 1;
constexpr std::uint64_t kFitTag = 2;
constexpr std::uint64_t kSubsetTag = 3;
constexpr std::uint64_t kCvTag = 4;

SeedSpec rep_seed(const DgpSpec& spec, Index rep) {
    return SeedSpec{spec.seed.master_seed, static_cast<std::uint64_t>(rep)};
}

double two_sided_critical() { return normal_quantile(0.975); }

// Outcome of one estimator in one replication.
struct Outcome {
    Vector beta_error;  // mean regression only
    double pred_error = 0.0;
    double model_size = 0.0;
    double alpha_hat = 0.0;
    double se = 0.0;
    std::optional<bool> reject;
    bool zero_selection = false;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (const double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

double root_n(std::size_t r) { return std::sqrt(static_cast<double>(r)); }

// ---------------------------------------------------------------------------
// Mean regression

Outcome mean_outcome(const MeanRegressionDraw& draw, const Vector& beta, const IndexSet& selected) {
    Outcome o;
    o.beta_error = beta - draw.beta0;
    o.pred_error = std::sqrt(mean_square(draw.data.x * o.beta_error));
    o.model_size = static_cast<double>(selected.size());
    return o;
}

std::vector<Outcome> mean_replication(const DgpSpec& spec, const std::vector<Estimator>& est, const StudyOptions& opts,
                                      Index rep) {
    const SeedSpec seed = rep_seed(spec, rep);
    const MeanRegressionDraw draw = gen_mean_regression(spec, rep);

    PenaltyRule base;
    base.num_sims = opts.num_sims;
    base.kind = PenaltyKind::lasso_x_dependent;
    std::optional<ScoreLevels> levels;
    auto shared_levels = [&]() {
        if (!levels) levels = design_score_levels(draw.data, base, seed.child(kLevelsTag), {}, Exec::serial);
        return *levels;
    };

    std::vector<Outcome> out;
    for (const Estimator e : est) {
        if (e == Estimator::oracle) {
            const OlsFit fit = post_ols(draw.data, draw.support);
            IndexSet sel;
            for (const Index j : draw.support)
                if (j != 0) sel.push_back(j);
            out.push_back(mean_outcome(draw, fit.beta, sel));
            continue;
        }
        FitRequest req;
        req.rule = base;
        req.exec = Exec::serial;
        req.cv_grid_size = opts.cv_grid_size;
        switch (e) {
            case Estimator::lasso_known_sigma:
            case Estimator::post_lasso_known_sigma:
                req.sigma = spec.sigma;
                req.post = e == Estimator::post_lasso_known_sigma;
                break;
            case Estimator::sqrt_lasso:
            case Estimator::post_sqrt_lasso:
                req.rule.kind = PenaltyKind::sqrt_lasso_x_dependent;
                req.post = e == Estimator::post_sqrt_lasso;
                break;
            case Estimator::iterated_lasso:
                req.sigma_opts.variant = SigmaVariant::lasso;
                break;
            case Estimator::post_iterated_lasso:
                req.sigma_opts.variant = SigmaVariant::post_lasso;
                req.post = true;
                break;
            case Estimator::cv_lasso:
            case Estimator::cv_post_lasso:
                req.rule.kind = PenaltyKind::cross_validation;
                req.rule.folds = opts.mean_cv_folds;
                req.post = e == Estimator::cv_post_lasso;
                break;
            default:
                throw InputError("estimator does not apply to the mean regression design");
        }
        if (req.rule.x_dependent()) req.levels = shared_levels();
        const FeasibleFit fit = fit_feasible(draw.data, req, seed.child(kFitTag));
        out.push_back(mean_outcome(draw, fit.beta, fit.selected));
    }
    return out;
}

McRow mean_row(Estimator e, const std::vector<const Outcome*>& outs) {
    const std::size_t r = outs.size();
    const Index p = outs.front()->beta_error.size();
    Vector bias = Vector::Zero(p);
    std::vector<double> pred, size;
    for (const Outcome* o : outs) {
        bias += o->beta_error;
        pred.push_back(o->pred_error);
        size.push_back(o->model_size);
    }
    bias /= static_cast<double>(r);
    const double norm = bias.norm();
    // Delta method: the bias norm moves with the mean error along its own
    // direction.
    std::optional<double> norm_se;
    if (norm > 0.0 && r > 1) {
        std::vector<double> proj;
        for (const Outcome* o : outs) proj.push_back(o->beta_error.dot(bias) / norm);
        norm_se = sd_of(proj) / root_n(r);
    }
    McRow row{to_string(e), {}};
    row.metrics.push_back({"bias_norm", norm, norm_se});
    row.metrics.push_back({"prediction_error", mean_of(pred), sd_of(pred) / root_n(r)});
    row.metrics.push_back({"median_prediction_error", median_of(pred), std::nullopt});
    row.metrics.push_back({"mean_model_size", mean_of(size), sd_of(size) / root_n(r)});
    return row;
}

// ---------------------------------------------------------------------------
// Instrumental variables

bool sup_score_rejects(const IVProblem& prob, double a) {
    SupScoreOptions so;
    so.simulate = false;
    so.exec = Exec::serial;
    Vector grid(1);
    grid[0] = a;
    const SupScoreResult res = sup_score(prob, grid, so, SeedSpec{});
    return res.statistic[0] > res.critical_asymptotic;
}

bool t_rejects(const IVFit& fit, double a) {
    const double se = fit.se_conventional[0];
    return std::abs(fit.alpha_hat[0] - a) > two_sided_critical() * se;
}

FirstStageOptions cv_first_stage_options(const StudyOptions& opts) {
    FirstStageOptions o;
    o.request.rule.kind = PenaltyKind::cross_validation;
    o.request.rule.folds = opts.iv_cv_folds;
    o.request.cv_grid_size = opts.cv_grid_size;
    o.request.exec = Exec::serial;
    return o;
}

Outcome iv_outcome(const IVFit& fit) {
    Outcome o;
    o.alpha_hat = fit.alpha_hat[0];
    return o;
}

std::vector<Outcome> iv_replication(const DgpSpec& spec, const std::vector<Estimator>& est, const StudyOptions& opts,
                                    Index rep) {
    const SeedSpec seed = rep_seed(spec, rep);
    const IvDraw draw = gen_iv(spec, rep);
    const IVProblem& prob = draw.problem;

    std::optional<IndexSet> all;
    std::optional<FirstStage> iterated, cv;
    std::optional<bool> sup_reject;
    auto all_set = [&]() -> const IndexSet& {
        if (!all) all = all_instruments_subset(prob, seed.child(kSubsetTag));
        return *all;
    };
    auto sup = [&]() {
        if (!sup_reject) sup_reject = sup_score_rejects(prob, draw.alpha0);
        return *sup_reject;
    };
    auto stage = [&](bool use_cv) -> const FirstStage& {
        auto& slot = use_cv ? cv : iterated;
        if (!slot) {
            slot = use_cv ? fit_first_stage(prob, cv_first_stage_options(opts), seed.child(kCvTag))
                          : fit_first_stage(prob, iv_first_stage_options(opts), seed.child(kFitTag));
        }
        return *slot;
    };

    std::vector<Outcome> out;
    for (const Estimator e : est) {
        Outcome o;
        switch (e) {
            case Estimator::tsls_all: {
                const IVFit fit = fit_2sls(prob, all_set());
                o = iv_outcome(fit);
                o.reject = t_rejects(fit, draw.alpha0);
                o.model_size = static_cast<double>(all_set().size());
                break;
            }
            case Estimator::fuller_all: {
                // Rejection needs many-instrument-robust errors; not computed.
                o = iv_outcome(fit_fuller(prob, all_set()));
                o.model_size = static_cast<double>(all_set().size());
                break;
            }
            case Estimator::iv_lasso:
            case Estimator::fuller_lasso:
            case Estimator::iv_lasso_cv:
            case Estimator::fuller_lasso_cv: {
                const bool use_cv = e == Estimator::iv_lasso_cv || e == Estimator::fuller_lasso_cv;
                const bool fuller = e == Estimator::fuller_lasso || e == Estimator::fuller_lasso_cv;
                const FirstStage& fs = stage(use_cv);
                const IVFit fit = fuller ? fit_fuller(prob, fs.selected) : fit_2sls(prob, fs.selected);
                o = iv_outcome(fit);
                o.zero_selection = fs.initially_empty;
                o.reject = fs.initially_empty ? sup() : t_rejects(fit, draw.alpha0);
                o.model_size = fs.initially_empty ? 0.0 : static_cast<double>(fs.selected.size());
                break;
            }
            case Estimator::sup_score:
                o.reject = sup();
                break;
            default:
                throw InputError("estimator does not apply to the IV design");
        }
        out.push_back(std::move(o));
    }
    return out;
}

McRow iv_row(Estimator e, const std::vector<const Outcome*>& outs, double alpha0) {
    const std::size_t r = outs.size();
    McRow row{to_string(e), {}};
    const bool has_point = e != Estimator::sup_score;
    std::vector<double> err, rej, size;
    Index zeros = 0;
    bool any_reject = false;
    for (const Outcome* o : outs) {
        err.push_back(o->alpha_hat - alpha0);
        size.push_back(o->model_size);
        if (o->zero_selection) ++zeros;
        if (o->reject) {
            any_reject = true;
            rej.push_back(*o->reject ? 1.0 : 0.0);
        }
    }
    if (has_point) {
        std::vector<double> sq;
        for (const double x : err) sq.push_back(x * x);
        row.metrics.push_back({"rmse", std::sqrt(mean_of(sq)), std::nullopt});
        row.metrics.push_back({"median_bias", median_of(err), std::nullopt});
    } else {
        row.metrics.push_back({"rmse", std::nullopt, std::nullopt});
        row.metrics.push_back({"median_bias", std::nullopt, std::nullopt});
    }
    if (any_reject) {
        const double rp = mean_of(rej);
        row.metrics.push_back({"rejection_rate", rp, std::sqrt(rp * (1.0 - rp) / static_cast<double>(r))});
    } else {
        row.metrics.push_back({"rejection_rate", std::nullopt, std::nullopt});
    }
    const bool lasso_based = e == Estimator::iv_lasso || e == Estimator::fuller_lasso ||
                             e == Estimator::iv_lasso_cv || e == Estimator::fuller_lasso_cv;
    row.metrics.push_back(
        {"zero_selection_count", lasso_based ? std::optional<double>(static_cast<double>(zeros)) : std::nullopt,
         std::nullopt});
    row.metrics.push_back({"mean_model_size", has_point ? std::optional<double>(mean_of(size)) : std::nullopt,
                           std::nullopt});
    return row;
}

// ---------------------------------------------------------------------------
// Partially linear model

Outcome plm_outcome(const PlmFit& fit, double alpha0) {
    Outcome o;
    o.alpha_hat = fit.alpha_hat;
    o.se = fit.se;
    o.reject = std::abs(fit.alpha_hat - alpha0) > two_sided_critical() * fit.se;
    o.model_size = static_cast<double>(fit.i_union.size());
    return o;
}

IndexSet nonzero(const Vector& v) {
    IndexSet s;
    for (Index j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) s.push_back(j);
    return s;
}

std::vector<Outcome> plm_replication(const DgpSpec& spec, const std::vector<Estimator>& est, const StudyOptions& opts,
                                     Index rep) {
    const SeedSpec seed = rep_seed(spec, rep);
    const PlmDraw draw = gen_plm(spec, rep);
    const PlmProblem& prob = draw.problem;
    FitRequest req;
    req.rule.kind = opts.plm_penalty;
    req.rule.num_sims = opts.num_sims;
    req.sigma_opts.variant = opts.plm_sigma_variant;
    req.exec = Exec::serial;
    std::optional<PlmAll> all;
    auto fits = [&]() -> const PlmAll& {
        if (!all) all = plm_all(prob, req, seed.child(kFitTag));
        return *all;
    };

    std::vector<Outcome> out;
    for (const Estimator e : est) {
        switch (e) {
            case Estimator::plm_lasso: out.push_back(plm_outcome(fits().lasso, draw.alpha0)); break;
            case Estimator::plm_post_lasso: out.push_back(plm_outcome(fits().post_lasso, draw.alpha0)); break;
            case Estimator::plm_indirect: out.push_back(plm_outcome(fits().indirect, draw.alpha0)); break;
            case Estimator::plm_double: out.push_back(plm_outcome(fits().double_selection, draw.alpha0)); break;
            case Estimator::plm_double_oracle: {
                const IndexSet truth = set_union(nonzero(draw.beta0), nonzero(draw.eta0));
                out.push_back(plm_outcome(plm_fixed_controls(prob, truth), draw.alpha0));
                break;
            }
            case Estimator::plm_oracle: {
                // Least squares of y1 - E[y1 | z] on d - E[d | z] = v.
                const Vector target = prob.y1 - prob.x * (draw.alpha0 * draw.eta0 + draw.beta0);
                const double vv = draw.v.squaredNorm();
                const double a = draw.v.dot(target) / vv;
                const double n = static_cast<double>(prob.n());
                const double s2 = (target - a * draw.v).squaredNorm() / (n - 1.0);
                Outcome o;
                o.alpha_hat = a;
                o.se = std::sqrt(s2 / vv);
                o.reject = std::abs(a - draw.alpha0) > two_sided_critical() * o.se;
                out.push_back(o);
                break;
            }
            default:
                throw InputError("estimator does not apply to the partially linear design");
        }
    }
    return out;
}

McRow plm_row(Estimator e, const std::vector<const Outcome*>& outs, double alpha0) {
    const std::size_t r = outs.size();
    std::vector<double> err, rej, size, se;
    for (const Outcome* o : outs) {
        err.push_back(o->alpha_hat - alpha0);
        rej.push_back(*o->reject ? 1.0 : 0.0);
        size.push_back(o->model_size);
        se.push_back(o->se);
    }
    const double sd = sd_of(err);
    const double rp = mean_of(rej);
    McRow row{to_string(e), {}};
    row.metrics.push_back({"mean_bias", mean_of(err), sd / root_n(r)});
    row.metrics.push_back(
        {"std_dev", sd, r > 1 ? std::optional<double>(sd / std::sqrt(2.0 * static_cast<double>(r - 1))) : std::nullopt});
    row.metrics.push_back({"rejection_rate", rp, std::sqrt(rp * (1.0 - rp) / static_cast<double>(r))});
    row.metrics.push_back({"mean_se", mean_of(se), std::nullopt});
    row.metrics.push_back({"mean_model_size", mean_of(size), std::nullopt});
    return row;
}

std::string format_block_label(const DgpSpec& spec) {
    std::ostringstream s;
    switch (spec.kind) {
        case DgpKind::mean_regression: s << "sigma=" << spec.sigma << " n=" << spec.n; break;
        case DgpKind::iv_nosignal: s << "no_signal n=" << spec.n; break;
        case DgpKind::iv_exponential: s << "F*=" << *spec.f_star << " n=" << spec.n; break;
        case DgpKind::plm: s << "plm n=" << spec.n << " p=" << spec.p; break;
    }
    return s.str();
}

}  // namespace

std::string to_string(DgpKind k) {
    switch (k) {
        case DgpKind::mean_regression: return "mean_regression";
        case DgpKind::iv_exponential: return "iv_exponential";
        case DgpKind::iv_nosignal: return "iv_nosignal";
        case DgpKind::plm: return "plm";
    }
    return "unknown";
}

void DgpSpec::validate() const {
    if (!(rho > -1.0 && rho < 1.0)) throw InputError("rho must lie in (-1, 1)");
    if (reps < 1) throw InputError("reps must be >= 1");
    if (n < 3) throw InputError("n must be >= 3");
    if (p < 1) throw InputError("p must be >= 1");
    if (f_star && !(*f_star > 0.0)) throw InputError("f_star must be > 0");
    if (kind == DgpKind::iv_nosignal && f_star) throw InputError("f_star cannot be set for the no-signal design");
    if (kind == DgpKind::iv_exponential && !f_star) throw InputError("the exponential design needs f_star");
    if (kind == DgpKind::mean_regression && (p < 6 || !(sigma >= 0.0)))
        throw InputError("mean regression needs p >= 6 and sigma >= 0");
    if (kind == DgpKind::plm && p < 15) throw InputError("the partially linear design needs p >= 15");
    if (!(corr_zeta_v > -1.0 && corr_zeta_v < 1.0)) throw InputError("corr_zeta_v must lie in (-1, 1)");
}

DgpSpec mean_regression_spec(double sigma, Index n) {
    DgpSpec s;
    s.kind = DgpKind::mean_regression;
    s.n = n;
    s.p = 500;
    s.sigma = sigma;
    s.reps = 1000;
    return s;
}

DgpSpec iv_spec(Index n, std::optional<double> f_star) {
    DgpSpec s;
    s.kind = f_star ? DgpKind::iv_exponential : DgpKind::iv_nosignal;
    s.n = n;
    s.p = 100;
    s.f_star = f_star;
    s.reps = 500;
    return s;
}

DgpSpec plm_spec() {
    DgpSpec s;
    s.kind = DgpKind::plm;
    s.n = 100;
    s.p = 200;
    s.reps = 1000;
    return s;
}

Matrix ar_gaussian(Rng& rng, Index n, Index p, double rho) {
    Matrix x(n, p);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (Index i = 0; i < n; ++i) {
        double prev = rng.normal();
        x(i, 0) = prev;
        for (Index j = 1; j < p; ++j) {
            prev = rho * prev + innov * rng.normal();
            x(i, j) = prev;
        }
    }
    return x;
}

Matrix ar_covariance(Index p, double rho) {
    Matrix s(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return s;
}

Vector mean_regression_coefficients(Index p) {
    Vector b = Vector::Zero(p);
    b[0] = 1.0;
    for (Index j = 1; j <= 5; ++j) b[j] = 1.0 / static_cast<double>(j);
    return b;
}

Vector iv_first_stage_coefficients(Index p) {
    Vector pi(p);
    for (Index h = 0; h < p; ++h) pi[h] = std::pow(0.7, static_cast<double>(h));
    return pi;
}

double iv_first_stage_variance(Index n, const Vector& pi, double rho, double f_star) {
    const Matrix sigma = ar_covariance(pi.size(), rho);
    return static_cast<double>(n) * pi.dot(sigma * pi) / (f_star * pi.squaredNorm());
}

Vector plm_outcome_coefficients(Index p) {
    Vector b = Vector::Zero(p);
    for (Index j = 0; j < 5; ++j) {
        b[j] = 1.0 / static_cast<double>(j + 1);
        b[10 + j] = 1.0 / static_cast<double>(j + 1);
    }
    return b;
}

Vector plm_treatment_coefficients(Index p) {
    Vector e = Vector::Zero(p);
    for (Index j = 0; j < std::min<Index>(10, p); ++j) e[j] = 1.0 / static_cast<double>(j + 1);
    return e;
}

MeanRegressionDraw gen_mean_regression(const DgpSpec& spec, Index rep) {
    spec.validate();
    if (spec.kind != DgpKind::mean_regression) throw InputError("not a mean regression design");
    Rng rng(rep_seed(spec, rep).child(kDataTag));
    const Matrix z = ar_gaussian(rng, spec.n, spec.p - 1, spec.rho);
    MeanRegressionDraw d;
    d.beta0 = mean_regression_coefficients(spec.p);
    d.support = nonzero(d.beta0);
    Matrix x(spec.n, spec.p);
    x.col(0).setOnes();
    x.rightCols(spec.p - 1) = z;
    Vector y = x * d.beta0 + spec.sigma * rng.normal_vector(spec.n);
    d.data = with_intercept(make_dataset(std::move(y), z));
    return d;
}

IvDraw gen_iv(const DgpSpec& spec, Index rep) {
    spec.validate();
    if (spec.kind != DgpKind::iv_exponential && spec.kind != DgpKind::iv_nosignal)
        throw InputError("not an IV design");
    Rng rng(rep_seed(spec, rep).child(kDataTag));
    IvDraw d;
    IVProblem& prob = d.problem;
    prob.x = ar_gaussian(rng, spec.n, spec.p, spec.rho);
    prob.w = Matrix::Ones(spec.n, 1);
    double sigma_v = 1.0;
    if (spec.kind == DgpKind::iv_exponential) {
        d.pi = iv_first_stage_coefficients(spec.p);
        sigma_v = std::sqrt(iv_first_stage_variance(spec.n, d.pi, spec.rho, *spec.f_star));
    } else {
        d.pi = Vector::Zero(spec.p);
    }
    const Vector zeta = rng.normal_vector(spec.n);
    const Vector u = rng.normal_vector(spec.n);
    const double r = spec.corr_zeta_v;
    const Vector v = sigma_v * (r * zeta + std::sqrt(1.0 - r * r) * u);
    prob.y2 = prob.x * d.pi + v;
    prob.y1 = d.alpha0 * prob.y2 + zeta;
    return d;
}

PlmDraw gen_plm(const DgpSpec& spec, Index rep) {
    spec.validate();
    if (spec.kind != DgpKind::plm) throw InputError("not a partially linear design");
    Rng rng(rep_seed(spec, rep).child(kDataTag));
    PlmDraw d;
    PlmProblem& prob = d.problem;
    prob.x = ar_gaussian(rng, spec.n, spec.p, spec.rho);
    d.beta0 = plm_outcome_coefficients(spec.p);
    d.eta0 = plm_treatment_coefficients(spec.p);
    d.v = rng.normal_vector(spec.n);
    const Vector zeta = rng.normal_vector(spec.n);
    prob.d = prob.x * d.eta0 + d.v;
    prob.y1 = d.alpha0 * prob.d + prob.x * d.beta0 + zeta;
    return d;
}

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::lasso_known_sigma: return "Lasso";
        case Estimator::post_lasso_known_sigma: return "Post-Lasso";
        case Estimator::sqrt_lasso: return "Square-root Lasso";
        case Estimator::post_sqrt_lasso: return "Post-Square-root Lasso";
        case Estimator::iterated_lasso: return "Iterated Lasso";
        case Estimator::post_iterated_lasso: return "Post-Iterated Lasso";
        case Estimator::cv_lasso: return "CV Lasso";
        case Estimator::cv_post_lasso: return "CV Post-Lasso";
        case Estimator::oracle: return "Oracle";
        case Estimator::tsls_all: return "2SLS(All)";
        case Estimator::fuller_all: return "FULL(All)";
        case Estimator::iv_lasso: return "IV-Lasso";
        case Estimator::fuller_lasso: return "FULL-Lasso";
        case Estimator::iv_lasso_cv: return "IV-Lasso-CV";
        case Estimator::fuller_lasso_cv: return "FULL-Lasso-CV";
        case Estimator::sup_score: return "Sup-Score";
        case Estimator::plm_lasso: return "Lasso";
        case Estimator::plm_post_lasso: return "Post-Lasso";
        case Estimator::plm_indirect: return "Indirect Post-Lasso";
        case Estimator::plm_double: return "Double selection";
        case Estimator::plm_double_oracle: return "Double selection Oracle";
        case Estimator::plm_oracle: return "Oracle";
    }
    return "unknown";
}

bool compatible(Estimator e, DgpKind k) {
    const auto v = static_cast<int>(e);
    switch (k) {
        case DgpKind::mean_regression: return v <= static_cast<int>(Estimator::oracle);
        case DgpKind::iv_exponential:
        case DgpKind::iv_nosignal:
            return v >= static_cast<int>(Estimator::tsls_all) && v <= static_cast<int>(Estimator::sup_score);
        case DgpKind::plm: return v >= static_cast<int>(Estimator::plm_lasso);
    }
    return false;
}

std::vector<Estimator> default_estimators(DgpKind k) {
    std::vector<Estimator> out;
    for (int v = 0; v <= static_cast<int>(Estimator::plm_oracle); ++v) {
        const auto e = static_cast<Estimator>(v);
        if (compatible(e, k)) out.push_back(e);
    }
    return out;
}

FirstStageOptions iv_first_stage_options(const StudyOptions& opts) {
    FirstStageOptions o;
    o.request.rule.kind = PenaltyKind::lasso_x_dependent;
    o.request.rule.num_sims = opts.num_sims;
    o.request.sigma_opts.variant = opts.iv_sigma_variant;
    o.request.exec = Exec::serial;
    o.start_from_top_instrument = true;
    return o;
}

const Metric* McRow::find(const std::string& name) const {
    for (const Metric& m : metrics)
        if (m.name == name) return &m;
    return nullptr;
}

double McRow::at(const std::string& name) const {
    const Metric* m = find(name);
    if (m == nullptr || !m->value) throw InputError("metric '" + name + "' not available for " + estimator);
    return *m->value;
}

const McRow& McBlock::row(const std::string& estimator) const {
    for (const McRow& r : rows)
        if (r.estimator == estimator) return r;
    throw InputError("no row '" + estimator + "' in block " + label);
}

const McBlock& McReport::block(const std::string& label) const {
    for (const McBlock& b : blocks)
        if (b.label == label) return b;
    throw InputError("no block '" + label + "' in study " + study);
}

McBlock run_study(const DgpSpec& spec, const std::vector<Estimator>& estimators, const StudyOptions& opts) {
    spec.validate();
    if (estimators.empty()) throw InputError("no estimators requested");
    for (const Estimator e : estimators) {
        if (!compatible(e, spec.kind))
            throw InputError("estimator " + to_string(e) + " does not match design " + to_string(spec.kind));
    }
    const auto reps = static_cast<std::size_t>(spec.reps);
    const auto results = parallel_map(
        reps,
        [&](std::size_t r) {
            const auto rep = static_cast<Index>(r);
            switch (spec.kind) {
                case DgpKind::mean_regression: return mean_replication(spec, estimators, opts, rep);
                case DgpKind::iv_exponential:
                case DgpKind::iv_nosignal: return iv_replication(spec, estimators, opts, rep);
                case DgpKind::plm: return plm_replication(spec, estimators, opts, rep);
            }
            return std::vector<Outcome>{};
        },
        opts.exec);

    McBlock block;
    block.label = format_block_label(spec);
    block.spec = spec;
    for (std::size_t k = 0; k < estimators.size(); ++k) {
        std::vector<const Outcome*> outs;
        outs.reserve(reps);
        for (const auto& rep : results) outs.push_back(&rep[k]);
        switch (spec.kind) {
            case DgpKind::mean_regression: block.rows.push_back(mean_row(estimators[k], outs)); break;
            case DgpKind::iv_exponential:
            case DgpKind::iv_nosignal: block.rows.push_back(iv_row(estimators[k], outs, 1.0)); break;
            case DgpKind::plm: block.rows.push_back(plm_row(estimators[k], outs, 1.0)); break;
        }
    }
    return block;
}

McReport run_named_study(const std::string& study, Index reps, std::uint64_t seed, const StudyOptions& opts) {
    if (reps < 1) throw InputError("reps must be >= 1");
    std::vector<DgpSpec> specs;
    McReport report;
    report.study = study;
    report.seed = seed;
    report.reps = reps;
    if (study == "table2") {
        specs = {mean_regression_spec(1.0), mean_regression_spec(0.1)};
        report.notes.emplace_back("all data-driven penalties use the X-dependent rule");
        report.notes.emplace_back("known-sigma Lasso and Post-Lasso are infeasible benchmarks");
    } else if (study == "table4") {
        for (const Index n : {Index{100}, Index{500}}) {
            specs.push_back(iv_spec(n, std::nullopt));
            for (const double f : {10.0, 40.0, 160.0}) specs.push_back(iv_spec(n, f));
        }
        report.notes.emplace_back("rejection rates use conventional 2SLS / k-class standard errors");
        report.notes.emplace_back("FULL(All) rejection rate needs many-instrument-robust errors and is not computed");
        report.notes.emplace_back("Lasso-based rejection falls back to the sup-score test when no instrument is selected");
        report.notes.emplace_back("when p + 1 >= n a uniform random subset of n - 2 instruments is used for the All rows");
    } else if (study == "plm") {
        specs = {plm_spec()};
        report.notes.emplace_back("both selection steps use the Square-root Lasso with the X-dependent penalty");
    } else {
        throw InputError("unknown study '" + study + "' (expected table2, table4 or plm)");
    }
    for (DgpSpec& s : specs) {
        s.reps = reps;
        s.seed = SeedSpec{seed, 0};
        report.blocks.push_back(run_study(s, default_estimators(s.kind), opts));
    }
    return report;
}

PowerCurve iv_power_curve(const DgpSpec& spec, const std::vector<double>& alternatives, const StudyOptions& opts) {
    spec.validate();
    if (spec.kind != DgpKind::iv_exponential && spec.kind != DgpKind::iv_nosignal)
        throw InputError("power curves need an IV design");
    if (alternatives.empty()) throw InputError("no alternatives given");
    const std::size_t m = alternatives.size();
    Vector grid(static_cast<Index>(m));
    for (std::size_t k = 0; k < m; ++k) grid[static_cast<Index>(k)] = alternatives[k];

    struct RepRejections {
        std::vector<char> lasso;
        std::vector<char> sup;
    };
    const auto results = parallel_map(
        static_cast<std::size_t>(spec.reps),
        [&](std::size_t r) {
            const auto rep = static_cast<Index>(r);
            const IvDraw draw = gen_iv(spec, rep);
            SupScoreOptions so;
            so.simulate = false;
            so.exec = Exec::serial;
            const SupScoreResult ss = sup_score(draw.problem, grid, so, SeedSpec{});
            const FirstStage fs =
                fit_first_stage(draw.problem, iv_first_stage_options(opts), rep_seed(spec, rep).child(kFitTag));
            const IVFit fit = fit_2sls(draw.problem, fs.selected);
            RepRejections out;
            for (std::size_t k = 0; k < m; ++k) {
                const bool sup_rej = ss.statistic[static_cast<Index>(k)] > ss.critical_asymptotic;
                out.sup.push_back(sup_rej ? 1 : 0);
                out.lasso.push_back((fs.initially_empty ? sup_rej : t_rejects(fit, alternatives[k])) ? 1 : 0);
            }
            return out;
        },
        opts.exec);

    PowerCurve curve;
    curve.alternatives = alternatives;
    curve.iv_lasso.assign(m, 0.0);
    curve.sup_score.assign(m, 0.0);
    for (const RepRejections& rr : results) {
        for (std::size_t k = 0; k < m; ++k) {
            curve.iv_lasso[k] += rr.lasso[k];
            curve.sup_score[k] += rr.sup[k];
        }
    }
    for (std::size_t k = 0; k < m; ++k) {
        curve.iv_lasso[k] /= static_cast<double>(spec.reps);
        curve.sup_score[k] /= static_cast<double>(spec.reps);
    }
    return curve;
}

}  // namespace sparse_infer
