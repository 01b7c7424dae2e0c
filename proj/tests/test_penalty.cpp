#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sparse_infer/errors.hpp"
#include "sparse_infer/feasible.hpp"
#include "sparse_infer/penalty.hpp"

using namespace sparse_infer;

namespace {

Dataset random_design(std::uint64_t key, Index n, Index p, double rho) {
    Rng rng(SeedSpec{31, key});
    const Matrix x = rho == 0.0 ? test_support::gaussian_matrix(rng, n, p) : test_support::ar_matrix(rng, n, p, rho);
    return normalize(make_dataset(rng.normal_vector(n), x));
}

PenaltyRule rule_of(PenaltyKind kind, Index sims = 1000) {
    PenaltyRule r;
    r.kind = kind;
    r.num_sims = sims;
    return r;
}

}  // namespace

TEST_CASE("normal quantile reference values") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
    CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

TEST_CASE("asymptotic lasso level: worked example and linearity") {
    PenaltyRule r;
    r.c = 1.0;
    r.gamma = 0.3173;
    CHECK(lambda_lasso_asymptotic(100, 1, r, 1.0) == doctest::Approx(20.0).epsilon(1e-3));
    r = PenaltyRule{};
    CHECK(lambda_lasso_asymptotic(100, 50, r, 2.0) == doctest::Approx(2.0 * lambda_lasso_asymptotic(100, 50, r, 1.0)));
    CHECK_THROWS_AS(lambda_lasso_asymptotic(100, 50, r, 0.0), InputError);
}

TEST_CASE("asymptotic level never exceeds the crude bound") {
    PenaltyRule r;
    for (const Index n : {10, 100, 1000})
        for (const Index p : {1, 5, 500, 100000})
            for (const double g : {0.01, 0.05, 0.3, 0.9}) {
                r.gamma = g;
                CHECK(lambda_lasso_asymptotic(n, p, r, 1.0) <= lambda_lasso_crude_bound(n, p, r, 1.0));
            }
}

TEST_CASE("rule validation") {
    PenaltyRule r;
    r.c = 1.0;
    CHECK_THROWS_AS(r.validate(), InputError);
    r = PenaltyRule{};
    r.gamma = 1.0;
    CHECK_THROWS_AS(r.validate(), InputError);
    r = rule_of(PenaltyKind::lasso_x_dependent, 99);
    CHECK_THROWS_AS(r.validate(), InputError);
    r = rule_of(PenaltyKind::lasso_x_independent, 10);
    CHECK_NOTHROW(r.validate());
}

TEST_CASE("upper empirical quantile takes the ceiling order statistic") {
    Vector v(100);
    for (Index i = 0; i < 100; ++i) v[i] = static_cast<double>(100 - i);
    CHECK(upper_empirical_quantile(v, 0.95) == 95.0);
    CHECK(upper_empirical_quantile(v, 0.951) == 96.0);
    CHECK(upper_empirical_quantile(v, 0.0) == 1.0);
}

TEST_CASE("simulated level respects the Gaussian bound") {
    const auto r = rule_of(PenaltyKind::lasso_x_dependent, 2000);
    for (std::uint64_t k = 0; k < 20; ++k) {
        const Index n = 50 + 10 * static_cast<Index>(k);
        const Index p = 5 + 20 * static_cast<Index>(k);
        const auto d = random_design(k, n, p, k % 2 == 0 ? 0.0 : 0.5);
        const auto draws = score_maxima(d.x, SeedSpec{3, k}, r.num_sims);
        const double level = upper_empirical_quantile(draws.max_abs, 0.95);
        const double se = quantile_standard_error(draws.max_abs, 0.95);
        const double bound = std::sqrt(static_cast<double>(n)) * normal_quantile(1.0 - 0.05 / (2.0 * static_cast<double>(p)));
        CAPTURE(k);
        CHECK(level <= bound + 2.0 * se);
        CHECK(bound <= std::sqrt(2.0 * static_cast<double>(n) * std::log(2.0 * static_cast<double>(p) / 0.05)));
        CHECK(lambda_lasso_xdep(d, r, 1.0, SeedSpec{3, k}) == doctest::Approx(2.0 * 1.1 * level));
    }
}

TEST_CASE("single column: simulated level matches sqrt(n) 1.96") {
    const Index n = 100;
    const auto d = random_design(77, n, 1, 0.0);
    const auto draws = score_maxima(d.x, SeedSpec{8, 1}, 20000);
    const double level = upper_empirical_quantile(draws.max_abs, 0.95);
    const double se = quantile_standard_error(draws.max_abs, 0.95);
    CHECK(std::abs(level - std::sqrt(100.0) * normal_quantile(0.975)) <= 2.0 * se);
}

TEST_CASE("square-root level is pivotal and below its asymptotic form") {
    const auto d = random_design(5, 80, 40, 0.5);
    auto other = d;
    other.y *= -13.0;
    const auto xdep = rule_of(PenaltyKind::sqrt_lasso_x_dependent, 10000);
    CHECK(lambda_sqrt_lasso(d, xdep, SeedSpec{2, 2}) == lambda_sqrt_lasso(other, xdep, SeedSpec{2, 2}));
    const auto asym = rule_of(PenaltyKind::sqrt_lasso_x_independent);
    const auto draws = score_maxima(d.x, SeedSpec{2, 2}, 10000);
    const Vector self = draws.max_abs.cwiseQuotient(draws.g_rms);
    const double se = 1.1 * quantile_standard_error(self, 0.95);
    CHECK(lambda_sqrt_lasso(d, xdep, SeedSpec{2, 2}) <= lambda_sqrt_lasso(d, asym, SeedSpec{}) + 2.0 * se);
    CHECK_THROWS_AS(lambda_sqrt_lasso(make_dataset(d.y, d.x * 2.0), xdep, SeedSpec{}), InputError);
}

TEST_CASE("doubling simulations keeps the quantile within MC error") {
    const auto d = random_design(6, 100, 50, 0.5);
    const auto a = score_maxima(d.x, SeedSpec{4, 0}, 1000);
    const auto b = score_maxima(d.x, SeedSpec{4, 1}, 2000);
    const double se = quantile_standard_error(a.max_abs, 0.95);
    CHECK(std::abs(upper_empirical_quantile(a.max_abs, 0.95) - upper_empirical_quantile(b.max_abs, 0.95)) <=
          2.0 * std::sqrt(se * se + std::pow(quantile_standard_error(b.max_abs, 0.95), 2)));
}

TEST_CASE("iterated sigma on pure noise") {
    double total = 0.0;
    int sparse_fits = 0;
    const int reps = 100;
    const auto r = rule_of(PenaltyKind::lasso_x_dependent, 500);
    for (int k = 0; k < reps; ++k) {
        Rng rng(SeedSpec{12, static_cast<std::uint64_t>(k)});
        const Matrix z = test_support::gaussian_matrix(rng, 100, 200);
        const auto d = normalize(with_intercept(make_dataset(rng.normal_vector(100), z)));
        const auto res = iterated_sigma(d, r, SigmaOptions{}, SeedSpec{13, static_cast<std::uint64_t>(k)});
        total += res.sigma;
        if (res.last_fit.support.size() <= 1) ++sparse_fits;
        CHECK(trace_monotone(res.trace));
    }
    CHECK(total / reps >= 0.8);
    CHECK(total / reps <= 1.2);
    CHECK(sparse_fits >= 90);
}

TEST_CASE("trace monotonicity helper") {
    SigmaTrace t;
    t.iterates = {1.0, 0.1, 0.5, 0.6, 0.7};
    CHECK(trace_monotone(t));
    CHECK_FALSE(trace_monotone(t, 0));
    t.iterates = {1.0, 0.1, 0.9, 0.8, 0.8};
    CHECK(trace_monotone(t));
    t.iterates = {1.0, 0.1, 0.9, 0.8, 0.85};
    CHECK_FALSE(trace_monotone(t));
}

TEST_CASE("huge tolerance stops after one refit") {
    Rng rng(SeedSpec{12, 999});
    const auto d = normalize(with_intercept(make_dataset(rng.normal_vector(60), test_support::gaussian_matrix(rng, 60, 20))));
    SigmaOptions o;
    o.nu = 1e9;
    const auto res = iterated_sigma(d, rule_of(PenaltyKind::lasso_x_independent), o, SeedSpec{});
    CHECK(res.trace.iterates.size() == 2);
    CHECK(res.sigma == res.trace.iterates[1]);
    CHECK(res.trace.converged);
}

TEST_CASE("post-lasso iteration applies the degrees-of-freedom correction") {
    Rng rng(SeedSpec{12, 1000});
    const Matrix z = test_support::gaussian_matrix(rng, 80, 30);
    Vector y = 3.0 * z.col(0) + rng.normal_vector(80);
    const auto d = normalize(with_intercept(make_dataset(y, z)));
    SigmaOptions o;
    o.variant = SigmaVariant::post_lasso;
    const auto res = iterated_sigma(d, rule_of(PenaltyKind::lasso_x_dependent), o, SeedSpec{1, 1});
    const auto refit = post_ols(d.x, d.y, res.last_fit.support, {0});
    const double n = 80.0;
    const double s = static_cast<double>(refit.columns.size());
    CHECK(res.sigma == doctest::Approx(std::sqrt(refit.residuals.squaredNorm() / (n - s))));
}

TEST_CASE("cross-validation basics") {
    Rng rng(SeedSpec{14, 0});
    const Matrix z = test_support::gaussian_matrix(rng, 60, 30);
    const Vector y = z.col(0) + 0.5 * z.col(1) + rng.normal_vector(60);
    const auto d = normalize(with_intercept(make_dataset(y, z)));
    CHECK(cv_lambda(d, 5, Vector::Constant(1, 0.7), SeedSpec{}) == 0.7);
    const Vector grid = default_lambda_grid(lasso_lambda_max(d.x, d.y, {0}), 30, 1e-2);
    CHECK(grid[0] > grid[29]);
    const double chosen = cv_lambda(d, 5, grid, SeedSpec{1, 2});
    CHECK(chosen < grid[0]);
    CHECK(chosen == cv_lambda(d, 5, grid, SeedSpec{1, 2}));
    CHECK_THROWS_AS(cv_lambda(d, 31, grid, SeedSpec{}), InputError);
    CHECK_THROWS_AS(cv_lambda(d, 1, grid, SeedSpec{}), InputError);
    Vector ascending = grid.reverse();
    CHECK_THROWS_AS(cv_lambda(d, 5, ascending, SeedSpec{}), InputError);
}

TEST_CASE("strong signal: cross-validated penalty below the iterated one") {
    Rng rng(SeedSpec{15, 0});
    const Matrix z = test_support::ar_matrix(rng, 100, 99, 0.5);
    Vector beta = Vector::Zero(99);
    beta.head(5) << 1.0, 0.5, 1.0 / 3, 0.25, 0.2;
    const Vector y = 1.0 + (z * beta).array() + 0.1 * rng.normal_vector(100).array();
    const auto d = with_intercept(make_dataset(y, z));
    FitRequest it;
    it.rule = rule_of(PenaltyKind::lasso_x_dependent);
    const auto iter = fit_feasible(d, it, SeedSpec{2, 0});
    FitRequest cv;
    cv.rule = rule_of(PenaltyKind::cross_validation);
    cv.cv_grid_size = 50;
    const auto cvf = fit_feasible(d, cv, SeedSpec{2, 0});
    CHECK(cvf.lambda < iter.lambda);
}

TEST_CASE("feasible fits: raw-scale coefficients and rule wiring") {
    Rng rng(SeedSpec{16, 0});
    Matrix z = test_support::gaussian_matrix(rng, 100, 40);
    z.col(3) *= 10.0;
    const Vector y = 2.0 + 0.3 * z.col(3).array() + rng.normal_vector(100).array();
    const auto d = with_intercept(make_dataset(y, z));
    FitRequest req;
    const auto sq = fit_feasible(d, req, SeedSpec{5, 5});
    CHECK(contains(sq.selected, 4));
    CHECK((d.x * sq.beta).isApprox(sq.fitted, 1e-10));
    req.post = true;
    const auto post = fit_feasible(d, req, SeedSpec{5, 5});
    CHECK(post.selected == sq.selected);
    CHECK(post.beta[4] == doctest::Approx(0.3).epsilon(0.05));
    req.sigma = 1.0;
    CHECK_THROWS_AS(fit_feasible(d, req, SeedSpec{}), InputError);
    req.rule.kind = PenaltyKind::lasso_x_dependent;
    const auto known = fit_feasible(d, req, SeedSpec{5, 5});
    CHECK(known.sigma_hat == 1.0);
    CHECK_FALSE(known.sigma_trace.has_value());
}

TEST_CASE("normalized fit equals raw fit with column loadings") {
    Rng rng(SeedSpec{17, 0});
    Matrix z = test_support::gaussian_matrix(rng, 50, 8);
    for (Index j = 0; j < 8; ++j) z.col(j) *= 1.0 + static_cast<double>(j);
    const Vector y = z.col(1) + rng.normal_vector(50);
    const auto raw = make_dataset(y, z);
    const auto nd = normalize(raw);
    const double lambda = 0.3 * lasso_lambda_max(nd.x, nd.y, {});
    const auto a = fit_lasso(nd, lambda, {});
    SolverOptions opts;
    opts.loadings = nd.col_scales;
    const auto b = fit_lasso(raw, lambda, {}, opts);
    CHECK((denormalize_coefficients(nd, a.beta) - b.beta).cwiseAbs().maxCoeff() < 1e-8);
}
