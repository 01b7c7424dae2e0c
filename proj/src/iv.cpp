#include "sparse_infer/iv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/QR>

#include "sparse_infer/errors.hpp"

namespace sparse_infer {
namespace {

constexpr std::uint64_t kSubsetTag = 11;

// Projection onto the orthogonal complement of span(cols).
class ResidualMaker {
public:
    explicit ResidualMaker(const Matrix& cols) {
        if (cols.cols() == 0) {
            basis_.resize(cols.rows(), 0);
            return;
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(cols);
        rank_ = qr.rank();
        basis_ = qr.householderQ() * Matrix::Identity(cols.rows(), rank_);
    }
    [[nodiscard]] Index rank() const { return rank_; }
    [[nodiscard]] const Matrix& basis() const { return basis_; }
    template <class M>
    [[nodiscard]] Matrix apply(const M& v) const {
        Matrix out = v;
        if (basis_.cols() > 0) out -= basis_ * (basis_.transpose() * out);
        return out;
    }

private:
    Matrix basis_;
    Index rank_ = 0;
};

Matrix instrument_block(const IVProblem& prob, const IndexSet& instruments) {
    Matrix z(prob.n(), static_cast<Index>(instruments.size()) + prob.w.cols());
    for (std::size_t c = 0; c < instruments.size(); ++c) {
        const Index j = instruments[c];
        if (j < 0 || j >= prob.x.cols()) throw InputError("instrument index out of range");
        z.col(static_cast<Index>(c)) = prob.x.col(j);
    }
    z.rightCols(prob.w.cols()) = prob.w;
    return z;
}

Matrix regressors(const IVProblem& prob) {
    Matrix d(prob.n(), 1 + prob.w.cols());
    d.col(0) = prob.y2;
    d.rightCols(prob.w.cols()) = prob.w;
    return d;
}

Vector standard_errors(const Matrix& inv_scaled, double sigma2) {
    return (sigma2 * inv_scaled.diagonal()).cwiseMax(0.0).cwiseSqrt();
}

// k-class estimator on the instrument set; k = 1 is 2SLS.
IVFit kclass(const IVProblem& prob, const IndexSet& instruments, double k) {
    const Index n = prob.n();
    const Matrix z = instrument_block(prob, instruments);
    if (z.cols() >= n) throw InputError("too many instruments for the sample size");
    const ResidualMaker mz(z);
    if (mz.rank() < z.cols()) throw NumericalError("instrument matrix is rank deficient");
    const Matrix d = regressors(prob);
    const Matrix mzd = mz.apply(d);
    const Vector mzy = mz.apply(prob.y1);
    const Matrix lhs = d.transpose() * d - k * (mzd.transpose() * mzd);
    const Vector rhs = d.transpose() * prob.y1 - k * (mzd.transpose() * mzy);
    Eigen::FullPivLU<Matrix> lu(lhs);
    if (!lu.isInvertible()) throw NumericalError("first stage uninformative (singular k-class system)");

    IVFit fit;
    fit.alpha_hat = lu.solve(rhs);
    fit.k_class = k;
    fit.selected_instruments = instruments;
    const Matrix inv = lu.inverse();
    const double nd = static_cast<double>(n);
    fit.sigma_zeta_conventional = (prob.y1 - d * fit.alpha_hat).squaredNorm() / nd;
    fit.se_conventional = standard_errors(inv, fit.sigma_zeta_conventional);
    if (k == 1.0) {
        // Estimated instrument A = P_Z d, so lhs = n E_n[A A'].
        const Matrix a = d - mzd;
        fit.sigma_zeta_hat = (prob.y1 - a * fit.alpha_hat).squaredNorm() / nd;
        fit.se = standard_errors(inv, fit.sigma_zeta_hat);
    } else {
        fit.sigma_zeta_hat = fit.sigma_zeta_conventional;
        fit.se = fit.se_conventional;
    }
    return fit;
}

Index most_correlated(const Matrix& x, const Vector& y) {
    const Vector yc = y.array() - y.mean();
    Index best = 0;
    double top = -1.0;
    for (Index j = 0; j < x.cols(); ++j) {
        const Vector xc = x.col(j).array() - x.col(j).mean();
        const double den = xc.norm() * yc.norm();
        const double r = den > 0.0 ? std::abs(xc.dot(yc)) / den : 0.0;
        if (r > top) {
            top = r;
            best = j;
        }
    }
    return best;
}

Vector loadings_for(const Partialled& part, const Vector& e) {
    const double nd = static_cast<double>(e.size());
    Vector g(part.x.cols());
    for (Index j = 0; j < part.x.cols(); ++j) g[j] = std::sqrt(e.cwiseProduct(part.x.col(j)).squaredNorm() / nd);
    return g;
}

}  // namespace

void IVProblem::validate() const {
    const Index n = y1.size();
    if (n < 3) throw InputError("need at least 3 observations");
    if (y2.size() != n || w.rows() != n || x.rows() != n) throw InputError("IV inputs have mismatched lengths");
    if (x.cols() < 1) throw InputError("need at least one instrument");
    if (!y1.allFinite() || !y2.allFinite() || !w.allFinite() || !x.allFinite())
        throw InputError("non-finite entry in IV data");
    if (w.cols() > 0 && ResidualMaker(w).rank() < w.cols())
        throw InputError("controls are collinear (E_n[w w'] singular)");
    if (!instrument_names.empty() && static_cast<Index>(instrument_names.size()) != x.cols())
        throw InputError("instrument name count does not match");
}

std::string IVProblem::instrument_name(Index j) const {
    if (j >= 0 && static_cast<std::size_t>(j) < instrument_names.size())
        return instrument_names[static_cast<std::size_t>(j)];
    return "z" + std::to_string(j + 1);
}

FirstStage fit_first_stage(const IVProblem& prob, const FirstStageOptions& opts, const SeedSpec& seed) {
    prob.validate();
    if (!(opts.decay > 0.0 && opts.decay < 1.0)) throw InputError("penalty decay must lie in (0, 1)");
    const Index kw = prob.w.cols();
    Matrix design(prob.n(), kw + prob.x.cols());
    design.leftCols(kw) = prob.w;
    design.rightCols(prob.x.cols()) = prob.x;
    Dataset d = make_dataset(prob.y2, design);
    IndexSet controls;
    for (Index j = 0; j < kw; ++j) controls.push_back(j);

    FitRequest req = opts.request;
    if (opts.start_from_top_instrument) req.sigma_opts.initial_set = {kw + most_correlated(prob.x, prob.y2)};
    FeasibleFit fit = fit_feasible(d, req, seed, controls);

    FirstStage out;
    out.sigma_hat = fit.sigma_hat;
    out.lambda = fit.lambda;
    if (fit.selected.empty()) {
        out.initially_empty = true;
        const SolverMethod method = req.rule.sqrt_criterion() ? SolverMethod::sqrt_lasso : SolverMethod::lasso;
        double lambda = fit.lambda;
        while (fit.selected.empty()) {
            if (out.decays >= opts.max_decays) {
                std::ostringstream msg;
                msg << "no instrument selected after " << opts.max_decays << " penalty decays";
                throw NumericalError(msg.str());
            }
            lambda *= opts.decay;
            ++out.decays;
            fit = fit_at_lambda(d, lambda, method, req.post, controls, req.solver);
        }
        out.fallback_used = true;
        out.lambda = lambda;
    }
    for (const Index j : fit.selected) out.selected.push_back(j - kw);
    out.fhat = fit.fitted;
    out.warnings = std::move(fit.warnings);
    return out;
}

IVFit fit_iv_lasso(const IVProblem& prob, const FirstStageOptions& opts, SecondStage second, const SeedSpec& seed,
                   double fuller_a) {
    FirstStage fs = fit_first_stage(prob, opts, seed);
    IVFit fit;
    if (second == SecondStage::fuller) {
        fit = fit_fuller(prob, fs.selected, fuller_a);
    } else {
        const Index kw = prob.w.cols();
        Matrix a(prob.n(), 1 + kw);
        a.col(0) = fs.fhat;
        a.rightCols(kw) = prob.w;
        const Matrix d = regressors(prob);
        const double nd = static_cast<double>(prob.n());
        Eigen::FullPivLU<Matrix> lu(a.transpose() * d / nd);
        if (!lu.isInvertible()) throw NumericalError("first stage uninformative (E_n[A d'] singular)");
        fit.alpha_hat = lu.solve(a.transpose() * prob.y1 / nd);
        Eigen::LDLT<Matrix> q(a.transpose() * a / nd);
        const Matrix q_inv = q.solve(Matrix::Identity(1 + kw, 1 + kw)) / nd;
        fit.sigma_zeta_hat = (prob.y1 - a * fit.alpha_hat).squaredNorm() / nd;
        fit.sigma_zeta_conventional = (prob.y1 - d * fit.alpha_hat).squaredNorm() / nd;
        fit.se = standard_errors(q_inv, fit.sigma_zeta_hat);
        fit.se_conventional = standard_errors(q_inv, fit.sigma_zeta_conventional);
        fit.selected_instruments = fs.selected;
    }
    fit.initially_empty = fs.initially_empty;
    fit.fallback_used = fs.fallback_used;
    for (auto& w : fs.warnings) fit.warnings.push_back(std::move(w));
    return fit;
}

IVFit fit_2sls(const IVProblem& prob, const IndexSet& instruments) {
    prob.validate();
    if (instruments.empty()) throw InputError("2SLS needs at least one instrument");
    return kclass(prob, instruments, 1.0);
}

namespace {

// Smallest root of det(num - kappa den) = 0 for positive semidefinite 2 x 2
// matrices. A rank-one `den` (one residual degree of freedom) leaves a single
// finite root.
double smallest_characteristic_root(const Eigen::Matrix2d& num, const Eigen::Matrix2d& den) {
    const double qa = den.determinant();
    const double qb = -(num(0, 0) * den(1, 1) + num(1, 1) * den(0, 0) - 2.0 * num(0, 1) * den(0, 1));
    const double qc = num.determinant();
    const double scale = den.norm() * den.norm();
    if (!(std::abs(qb) > 0.0)) throw NumericalError("LIML eigenproblem failed (instruments fit y exactly)");
    if (std::abs(qa) <= 1e-12 * scale) return -qc / qb;
    const double disc = std::max(qb * qb - 4.0 * qa * qc, 0.0);
    // Numerically stable pair of roots.
    const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
    const double r1 = q / qa;
    const double r2 = qc / q;
    return std::min(r1, r2);
}

}  // namespace

IndexSet all_instruments_subset(const IVProblem& prob, const SeedSpec& seed) {
    const Index p = prob.x.cols();
    const Index kw = prob.w.cols();
    IndexSet all;
    if (p + kw < prob.n()) {
        for (Index j = 0; j < p; ++j) all.push_back(j);
        return all;
    }
    const Index keep = prob.n() - kw - 1;
    if (keep < 1) throw InputError("sample too small for any instrument");
    const auto perm = random_permutation(seed.child(kSubsetTag), p);
    all.assign(perm.begin(), perm.begin() + keep);
    return canonicalize(all);
}

IVFit fit_2sls_all(const IVProblem& prob, const SeedSpec& seed) {
    return fit_2sls(prob, all_instruments_subset(prob, seed));
}

IVFit fit_fuller(const IVProblem& prob, const IndexSet& instruments, double a) {
    prob.validate();
    if (instruments.empty()) throw InputError("Fuller needs at least one instrument");
    const Index n = prob.n();
    const Matrix z = instrument_block(prob, instruments);
    const Index big_k = z.cols();
    if (n <= big_k) throw InputError("Fuller needs n > number of instruments plus controls");
    Matrix y(n, 2);
    y.col(0) = prob.y1;
    y.col(1) = prob.y2;
    const Matrix mw_y = ResidualMaker(prob.w).apply(y);
    const Matrix mz_y = ResidualMaker(z).apply(y);
    const Eigen::Matrix2d num = mw_y.transpose() * mw_y;
    const Eigen::Matrix2d den = mz_y.transpose() * mz_y;
    const double kappa = smallest_characteristic_root(num, den);
    const double k = kappa - a / static_cast<double>(n - big_k);
    return kclass(prob, instruments, k);
}

Region make_region(const Vector& grid, const std::vector<bool>& accept) {
    Region r;
    for (Index i = 0; i < grid.size(); ++i) {
        if (!accept[static_cast<std::size_t>(i)]) continue;
        r.accepted.push_back(grid[i]);
    }
    r.empty = r.accepted.empty();
    if (!r.empty) {
        r.lo = *std::min_element(r.accepted.begin(), r.accepted.end());
        r.hi = *std::max_element(r.accepted.begin(), r.accepted.end());
        r.unbounded_below = accept.front();
        r.unbounded_above = accept.back();
    }
    return r;
}

Partialled partial_out(const IVProblem& prob) {
    prob.validate();
    const ResidualMaker mw(prob.w);
    Partialled part;
    part.w_basis = mw.basis();
    part.y1 = mw.apply(prob.y1);
    part.y2 = mw.apply(prob.y2);
    const Matrix xt = mw.apply(prob.x);
    const double nd = static_cast<double>(prob.n());
    std::vector<Index> keep;
    for (Index j = 0; j < xt.cols(); ++j) {
        const double before = std::sqrt(prob.x.col(j).squaredNorm() / nd);
        const double after = std::sqrt(xt.col(j).squaredNorm() / nd);
        if (after <= 1e-12 * std::max(before, 1.0)) {
            part.warnings.push_back("instrument '" + prob.instrument_name(j) + "' lies in the span of the controls; dropped");
            continue;
        }
        keep.push_back(j);
    }
    if (keep.empty()) throw InputError("no instrument varies after partialling out the controls");
    part.x.resize(prob.n(), static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        const auto col = xt.col(keep[c]);
        part.x.col(static_cast<Index>(c)) = col / std::sqrt(col.squaredNorm() / nd);
    }
    part.kept = keep;
    return part;
}

double sup_score_statistic(const Partialled& part, double a) {
    const Vector e = part.y1 - a * part.y2;
    const Vector load = loadings_for(part, e);
    double best = 0.0;
    for (Index j = 0; j < part.x.cols(); ++j) {
        if (!(load[j] > 0.0)) continue;
        best = std::max(best, std::abs(part.x.col(j).dot(e)) / load[j]);
    }
    return best;
}

SupScoreResult sup_score(const IVProblem& prob, const Vector& grid, const SupScoreOptions& opts, const SeedSpec& seed) {
    if (!(opts.gamma > 0.0 && opts.gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
    if (!(opts.c > 1.0)) throw InputError("penalty constant c must be > 1");
    const Partialled part = partial_out(prob);
    SupScoreResult out;
    out.warnings = part.warnings;
    out.grid = grid;
    out.statistic.resize(grid.size());
    const Index n = prob.n();
    const auto p = static_cast<double>(part.x.cols());
    out.critical_asymptotic = opts.c * std::sqrt(static_cast<double>(n)) * normal_quantile(1.0 - opts.gamma / (2.0 * p));
    out.critical_finite = std::numeric_limits<double>::quiet_NaN();
    if (opts.simulate) {
        if (opts.num_sims < 100) throw InputError("num_sims must be >= 100");
        const Vector draws = sup_score_maxima(part.x, part.w_basis, seed, opts.num_sims, opts.exec);
        out.critical_finite = upper_empirical_quantile(draws, 1.0 - opts.gamma);
    }

    bool skipped = false;
    std::vector<bool> acc_f(static_cast<std::size_t>(grid.size()));
    std::vector<bool> acc_a(static_cast<std::size_t>(grid.size()));
    for (Index g = 0; g < grid.size(); ++g) {
        const Vector e = part.y1 - grid[g] * part.y2;
        if ((loadings_for(part, e).array() == 0.0).any()) skipped = true;
        out.statistic[g] = sup_score_statistic(part, grid[g]);
        acc_f[static_cast<std::size_t>(g)] = opts.simulate && out.statistic[g] <= out.critical_finite;
        acc_a[static_cast<std::size_t>(g)] = out.statistic[g] <= out.critical_asymptotic;
    }
    if (skipped) out.warnings.emplace_back("some instrument columns had a zero score denominator and were skipped");
    if (grid.size() > 0) {
        out.ci_finite = make_region(grid, acc_f);
        out.ci_asymptotic = make_region(grid, acc_a);
    }
    return out;
}

IndexSet inverse_lasso_region(const IVProblem& prob, const Vector& grid, const SupScoreOptions& opts,
                              const SeedSpec& seed) {
    IndexSet region;
    if (grid.size() == 0) return region;
    SupScoreOptions sim = opts;
    sim.simulate = true;
    const double crit = sup_score(prob, Vector(), sim, seed).critical_finite;
    const Partialled part = partial_out(prob);
    for (Index g = 0; g < grid.size(); ++g) {
        const Vector e = part.y1 - grid[g] * part.y2;
        SolverOptions so;
        so.loadings = loadings_for(part, e);
        if (fit_lasso(part.x, e, 2.0 * crit, {}, so).support.empty()) region.push_back(g);
    }
    return region;
}

Vector linear_grid(double lo, double hi, Index count) {
    if (count < 1) throw InputError("grid needs at least one point");
    if (!(hi >= lo)) throw InputError("grid upper end must be >= lower end");
    if (count == 1) return Vector::Constant(1, lo);
    return Vector::LinSpaced(count, lo, hi);
}

Vector default_sup_score_grid(const IVProblem& prob, const SeedSpec& seed) {
    const IVFit ref = fit_2sls_all(prob, seed);
    const double half = 10.0 * std::max(ref.se_conventional[0], 1e-8);
    return linear_grid(ref.alpha_hat[0] - half, ref.alpha_hat[0] + half, 401);
}

}  // namespace sparse_infer
