#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/mc.hpp"

using namespace sparse_infer;

namespace {

double correlation(const Vector& a, const Vector& b) {
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

double sample_variance(const Vector& a) {
    const Vector ac = a.array() - a.mean();
    return ac.squaredNorm() / static_cast<double>(a.size() - 1);
}

StudyOptions serial_options() {
    StudyOptions o;
    o.num_sims = 300;
    o.exec = Exec::serial;
    return o;
}

bool same_block(const McBlock& a, const McBlock& b) {
    if (a.label != b.label || a.rows.size() != b.rows.size()) return false;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        const McRow& x = a.rows[r];
        const McRow& y = b.rows[r];
        if (x.estimator != y.estimator || x.metrics.size() != y.metrics.size()) return false;
        for (std::size_t m = 0; m < x.metrics.size(); ++m) {
            if (x.metrics[m].name != y.metrics[m].name || x.metrics[m].value != y.metrics[m].value ||
                x.metrics[m].mc_se != y.metrics[m].mc_se)
                return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("AR design has the target neighbour correlation") {
    DgpSpec spec = mean_regression_spec(1.0);
    spec.n = 100000;
    spec.p = 6;
    const MeanRegressionDraw d = gen_mean_regression(spec, 0);
    // Columns 1 and 2 are z_1 and z_2; column 0 is the intercept.
    CHECK(std::abs(correlation(d.data.x.col(1), d.data.x.col(2)) - 0.5) < 0.01);
    CHECK(std::abs(correlation(d.data.x.col(1), d.data.x.col(3)) - 0.25) < 0.01);
}

TEST_CASE("noiseless mean regression: least squares on the support recovers the coefficients") {
    DgpSpec spec = mean_regression_spec(0.0);
    spec.p = 40;
    const MeanRegressionDraw d = gen_mean_regression(spec, 3);
    const OlsFit fit = post_ols(d.data, d.support);
    CHECK((fit.beta - d.beta0).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(d.support == IndexSet{0, 1, 2, 3, 4, 5});
}

TEST_CASE("exponential first stage: coefficient norm and strength calibration") {
    const Vector pi = iv_first_stage_coefficients(100);
    // sum_{h<100} 0.49^h = (1 - 0.49^100) / 0.51.
    CHECK(pi.squaredNorm() == doctest::Approx(1.0 / 0.51).epsilon(1e-12));
    CHECK(pi.squaredNorm() == doctest::Approx(1.9608).epsilon(1e-4));

    // Implied concentration n pi' S pi / (sigma_v^2 pi'pi) with the sample
    // Gram matrix and sample first-stage noise variance.
    DgpSpec spec = iv_spec(20000, 10.0);
    const IvDraw d = gen_iv(spec, 0);
    const Vector signal = d.problem.x * d.pi;
    const Vector v = d.problem.y2 - signal;
    const double implied = signal.squaredNorm() / (sample_variance(v) * d.pi.squaredNorm());
    CHECK(implied == doctest::Approx(10.0).epsilon(0.02));
    CHECK(std::abs(correlation(v, d.problem.y1 - d.problem.y2) - 0.3) < 0.02);
}

TEST_CASE("no-signal first stage is uncorrelated with every instrument") {
    DgpSpec spec = iv_spec(100000, std::nullopt);
    const IvDraw d = gen_iv(spec, 0);
    CHECK(d.pi.isZero());
    double worst = 0.0;
    for (Index h = 0; h < spec.p; ++h) worst = std::max(worst, std::abs(correlation(d.problem.y2, d.problem.x.col(h))));
    CHECK(worst < 0.01);
}

TEST_CASE("partially linear design moments") {
    DgpSpec spec = plm_spec();
    spec.n = 100000;
    spec.p = 20;
    const PlmDraw d = gen_plm(spec, 0);
    CHECK(std::abs(d.problem.d.mean()) < 0.02);
    const double var_d = d.eta0.dot(ar_covariance(spec.p, spec.rho) * d.eta0) + 1.0;
    CHECK(sample_variance(d.problem.d) == doctest::Approx(var_d).epsilon(0.02));
    const Vector zeta = d.problem.y1 - d.alpha0 * d.problem.d - d.problem.x * d.beta0;
    CHECK(std::abs(correlation(zeta, d.v)) < 0.01);
    CHECK(d.beta0.head(15).cwiseAbs().minCoeff() == 0.0);
    CHECK(d.beta0[10] == 1.0);
    CHECK(d.eta0[9] == doctest::Approx(0.1));
}

TEST_CASE("mean-regression metrics match a hand computation over two replications") {
    DgpSpec spec = mean_regression_spec(1.0, 30);
    spec.p = 12;
    spec.reps = 2;
    spec.seed = SeedSpec{77, 0};
    const McBlock block = run_study(spec, {Estimator::oracle}, serial_options());

    Vector bias = Vector::Zero(spec.p);
    double pred = 0.0;
    for (Index r = 0; r < 2; ++r) {
        const MeanRegressionDraw d = gen_mean_regression(spec, r);
        const Vector err = post_ols(d.data, d.support).beta - d.beta0;
        bias += err / 2.0;
        pred += std::sqrt((d.data.x * err).squaredNorm() / static_cast<double>(spec.n)) / 2.0;
    }
    const McRow& row = block.row("Oracle");
    CHECK(row.at("bias_norm") == doctest::Approx(bias.norm()).epsilon(1e-12));
    CHECK(row.at("prediction_error") == doctest::Approx(pred).epsilon(1e-12));
    // The median of two values is their mean.
    CHECK(row.at("median_prediction_error") == doctest::Approx(pred).epsilon(1e-12));
    CHECK(row.at("mean_model_size") == 5.0);
}

TEST_CASE("IV metrics match a hand computation over two replications") {
    DgpSpec spec = iv_spec(60, 40.0);
    spec.p = 8;
    spec.reps = 2;
    spec.seed = SeedSpec{78, 0};
    const McBlock block = run_study(spec, {Estimator::tsls_all, Estimator::sup_score}, serial_options());

    IndexSet all;
    for (Index j = 0; j < spec.p; ++j) all.push_back(j);
    double e[2];
    double rej = 0.0;
    for (Index r = 0; r < 2; ++r) {
        const IvDraw d = gen_iv(spec, r);
        const IVFit fit = fit_2sls(d.problem, all);
        e[r] = fit.alpha_hat[0] - 1.0;
        if (std::abs(e[r]) > 1.959963984540054 * fit.se_conventional[0]) rej += 0.5;
    }
    const McRow& row = block.row("2SLS(All)");
    CHECK(row.at("rmse") == doctest::Approx(std::sqrt((e[0] * e[0] + e[1] * e[1]) / 2.0)).epsilon(1e-12));
    CHECK(row.at("median_bias") == doctest::Approx((e[0] + e[1]) / 2.0).epsilon(1e-12));
    CHECK(row.at("rejection_rate") == rej);
    CHECK(row.at("mean_model_size") == 8.0);
    CHECK(!row.find("zero_selection_count")->value);
    const McRow& sup = block.row("Sup-Score");
    CHECK(!sup.find("rmse")->value);
    const double rp = sup.at("rejection_rate");
    CHECK((rp == 0.0 || rp == 0.5 || rp == 1.0));
}

TEST_CASE("PLM metrics match a hand computation over two replications") {
    DgpSpec spec = plm_spec();
    spec.p = 30;
    spec.reps = 2;
    spec.seed = SeedSpec{79, 0};
    const McBlock block = run_study(spec, {Estimator::plm_double_oracle}, serial_options());

    double e[2];
    double se[2];
    double rej = 0.0;
    for (Index r = 0; r < 2; ++r) {
        const PlmDraw d = gen_plm(spec, r);
        const PlmFit fit = plm_fixed_controls(d.problem, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
        e[r] = fit.alpha_hat - 1.0;
        se[r] = fit.se;
        if (std::abs(e[r]) > 1.959963984540054 * fit.se) rej += 0.5;
    }
    const McRow& row = block.row("Double selection Oracle");
    CHECK(row.at("mean_bias") == doctest::Approx((e[0] + e[1]) / 2.0).epsilon(1e-12));
    // Sample standard deviation of two values: |e0 - e1| / sqrt(2).
    CHECK(row.at("std_dev") == doctest::Approx(std::abs(e[0] - e[1]) / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(row.at("rejection_rate") == rej);
    CHECK(row.at("mean_se") == doctest::Approx((se[0] + se[1]) / 2.0).epsilon(1e-12));
    CHECK(row.at("mean_model_size") == 15.0);
}

TEST_CASE("a single replication reports that replication's values") {
    DgpSpec spec = mean_regression_spec(1.0, 40);
    spec.p = 20;
    spec.reps = 1;
    const McBlock block = run_study(spec, {Estimator::oracle}, serial_options());
    const MeanRegressionDraw d = gen_mean_regression(spec, 0);
    const Vector err = post_ols(d.data, d.support).beta - d.beta0;
    CHECK(block.row("Oracle").at("bias_norm") == doctest::Approx(err.norm()).epsilon(1e-12));
    CHECK(!block.row("Oracle").find("bias_norm")->mc_se);
}

TEST_CASE("studies are reproducible and independent of the thread count") {
    DgpSpec spec = plm_spec();
    spec.p = 40;
    spec.reps = 6;
    spec.seed = SeedSpec{80, 0};
    StudyOptions serial = serial_options();
    StudyOptions parallel = serial;
    parallel.exec = Exec::parallel;
    const auto est = default_estimators(DgpKind::plm);
    const McBlock a = run_study(spec, est, serial);
    const McBlock b = run_study(spec, est, serial);
    CHECK(same_block(a, b));
    set_num_threads(1);
    const McBlock c = run_study(spec, est, parallel);
    set_num_threads(8);
    const McBlock d = run_study(spec, est, parallel);
    set_num_threads(0);
    CHECK(same_block(a, c));
    CHECK(same_block(a, d));

    spec.seed = SeedSpec{81, 0};
    CHECK(!same_block(a, run_study(spec, est, serial)));
}

TEST_CASE("estimators must match the design") {
    DgpSpec spec = iv_spec(100, 40.0);
    spec.reps = 1;
    CHECK_THROWS_AS(run_study(spec, {Estimator::oracle}), InputError);
    CHECK_THROWS_AS(run_study(plm_spec(), {Estimator::iv_lasso}), InputError);
    CHECK_THROWS_AS(run_study(spec, {}), InputError);
    CHECK_THROWS_AS(run_named_study("table9", 1, 1), InputError);
    for (const DgpKind k : {DgpKind::mean_regression, DgpKind::iv_exponential, DgpKind::plm}) {
        for (const Estimator e : default_estimators(k)) CHECK(compatible(e, k));
    }
}

TEST_CASE("design validation") {
    DgpSpec spec = iv_spec(100, std::nullopt);
    spec.f_star = 10.0;
    CHECK_THROWS_AS(spec.validate(), InputError);  // no-signal with a strength
    spec = iv_spec(100, 10.0);
    spec.rho = 1.0;
    CHECK_THROWS_AS(spec.validate(), InputError);
    spec = iv_spec(100, 10.0);
    spec.reps = 0;
    CHECK_THROWS_AS(spec.validate(), InputError);
    spec = iv_spec(100, -1.0);
    CHECK_THROWS_AS(spec.validate(), InputError);
    CHECK_THROWS_AS(gen_plm(iv_spec(100, 10.0), 0), InputError);
}

TEST_CASE("IV rejection frequency grows with the distance from the truth") {
    DgpSpec spec = iv_spec(100, 160.0);
    spec.reps = 200;
    spec.seed = SeedSpec{82, 0};
    StudyOptions opts;
    opts.num_sims = 300;
    // Scale of the alternatives: the IV-Lasso standard error on one draw.
    const IvDraw d0 = gen_iv(spec, 0);
    const IVFit pilot = fit_iv_lasso(d0.problem, iv_first_stage_options(opts), SecondStage::twosls, SeedSpec{1, 0});
    const double se = pilot.se_conventional[0];
    const std::vector<double> alternatives{1.0, 1.0 + 0.25 * se, 1.0 + 0.5 * se, 1.0 + se};
    const PowerCurve curve = iv_power_curve(spec, alternatives, opts);
    int inversions = 0;
    for (std::size_t k = 1; k < alternatives.size(); ++k) {
        const double prev = curve.iv_lasso[k - 1];
        const double cur = curve.iv_lasso[k];
        if (cur < prev) {
            ++inversions;
            const double mc_se = std::sqrt(prev * (1.0 - prev) / 200.0);
            CHECK(prev - cur <= 2.0 * mc_se);
        }
        CHECK(curve.sup_score[k] >= 0.0);
    }
    CHECK(inversions <= 1);
    CHECK(curve.iv_lasso.back() > curve.iv_lasso.front());
    MESSAGE("power " << curve.iv_lasso[0] << " " << curve.iv_lasso[1] << " " << curve.iv_lasso[2] << " "
                     << curve.iv_lasso[3]);
}
