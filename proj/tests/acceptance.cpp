// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run all criteria
//   acceptance 3 6        run the listed criteria
// Exit status is 0 only when every requested criterion passes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sparse_infer/iv.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/mc.hpp"
#include "sparse_infer/penalty.hpp"
#include "sparse_infer/report.hpp"
#include "sparse_infer/solvers.hpp"

using namespace sparse_infer;

namespace {

constexpr std::uint64_t kSeed = 20130521;

struct Verdict {
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "  ok    " : "  FAIL  ") + what);
    }
};

std::string num(double v, int digits = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2e", v);
    return buf;
}

double metric(const McBlock& b, Estimator e, const std::string& name) {
    const Metric* m = b.row(to_string(e)).find(name);
    if (m == nullptr || !m->value) throw std::runtime_error("missing metric " + name + " for " + to_string(e));
    return *m->value;
}

double metric_se(const McBlock& b, Estimator e, const std::string& name) {
    const Metric* m = b.row(to_string(e)).find(name);
    return m != nullptr && m->mc_se ? *m->mc_se : 0.0;
}

McBlock run_block(DgpSpec spec, Index reps, const std::vector<Estimator>& estimators) {
    spec.reps = reps;
    spec.seed = SeedSpec{kSeed, 0};
    return run_study(spec, estimators);
}

// Target within max(rel * target, 3 MC standard errors).
void near_target(Verdict& v, const McBlock& b, Estimator e, const std::string& name, double target, double rel) {
    const double got = metric(b, e, name);
    const double tol = std::max(rel * std::abs(target), 3.0 * metric_se(b, e, name));
    v.check(std::abs(got - target) <= tol, b.label + " " + to_string(e) + " " + name + " = " + num(got) +
                                               " (target " + num(target) + " +/- " + num(tol) + ")");
}

void in_range(Verdict& v, const std::string& what, double got, double lo, double hi) {
    v.check(got >= lo && got <= hi, what + " = " + num(got) + " (range [" + num(lo) + ", " + num(hi) + "])");
}

// ---------------------------------------------------------------------------

Verdict mean_regression_table() {
    Verdict v;
    const McBlock high = run_block(mean_regression_spec(1.0), 1000,
                                   {Estimator::lasso_known_sigma, Estimator::post_lasso_known_sigma,
                                    Estimator::sqrt_lasso, Estimator::oracle});
    near_target(v, high, Estimator::oracle, "bias_norm", 0.035, 0.15);
    near_target(v, high, Estimator::oracle, "prediction_error", 0.238, 0.15);
    near_target(v, high, Estimator::post_lasso_known_sigma, "bias_norm", 0.129, 0.15);
    near_target(v, high, Estimator::post_lasso_known_sigma, "prediction_error", 0.347, 0.15);
    near_target(v, high, Estimator::lasso_known_sigma, "bias_norm", 0.444, 0.15);
    near_target(v, high, Estimator::lasso_known_sigma, "prediction_error", 0.654, 0.15);
    near_target(v, high, Estimator::sqrt_lasso, "bias_norm", 0.526, 0.15);
    near_target(v, high, Estimator::sqrt_lasso, "prediction_error", 0.770, 0.15);

    const McBlock low = run_block(mean_regression_spec(0.1), 1000, {Estimator::post_sqrt_lasso, Estimator::oracle});
    const double post = metric(low, Estimator::post_sqrt_lasso, "prediction_error");
    const double oracle = metric(low, Estimator::oracle, "prediction_error");
    v.check(std::abs(post - 0.0238) <= 0.10 * 0.0238,
            low.label + " Post-Square-root Lasso prediction_error = " + num(post, 5) + " (target 0.0238 +/- 10%)");
    v.check(std::abs(post - oracle) <= 0.10 * oracle,
            low.label + " Post-Square-root Lasso vs Oracle prediction_error: " + num(post, 5) + " vs " +
                num(oracle, 5) + " (within 10%)");
    return v;
}

Verdict iv_table() {
    Verdict v;
    const Index reps = 500;
    const McBlock nosig =
        run_block(iv_spec(100, std::nullopt), reps, {Estimator::iv_lasso, Estimator::sup_score});
    in_range(v, nosig.label + " IV-Lasso rejection_rate", metric(nosig, Estimator::iv_lasso, "rejection_rate"), 0.0,
             0.05);
    in_range(v, nosig.label + " IV-Lasso zero_selection_count",
             metric(nosig, Estimator::iv_lasso, "zero_selection_count"), 415.0, 495.0);

    const McBlock f40 = run_block(iv_spec(100, 40.0), reps, {Estimator::iv_lasso, Estimator::sup_score});
    in_range(v, f40.label + " IV-Lasso rmse", metric(f40, Estimator::iv_lasso, "rmse"), 0.051 - 0.008,
             0.051 + 0.008);
    in_range(v, f40.label + " IV-Lasso rejection_rate", metric(f40, Estimator::iv_lasso, "rejection_rate"), 0.02,
             0.09);

    const McBlock f10 = run_block(iv_spec(100, 10.0), reps, {Estimator::tsls_all, Estimator::sup_score});
    in_range(v, f10.label + " 2SLS(All) rejection_rate", metric(f10, Estimator::tsls_all, "rejection_rate"), 0.6,
             1.0);

    std::vector<McBlock> sup_blocks{nosig, f40, f10};
    sup_blocks.push_back(run_block(iv_spec(100, 160.0), reps, {Estimator::sup_score}));
    for (const Index n : {Index{500}}) {
        sup_blocks.push_back(run_block(iv_spec(n, std::nullopt), reps, {Estimator::sup_score}));
        for (const double f : {10.0, 40.0, 160.0}) sup_blocks.push_back(run_block(iv_spec(n, f), reps, {Estimator::sup_score}));
    }
    for (const McBlock& b : sup_blocks)
        in_range(v, b.label + " Sup-Score rejection_rate", metric(b, Estimator::sup_score, "rejection_rate"), 0.0,
                 0.02);
    return v;
}

Verdict plm_table() {
    Verdict v;
    const McBlock b =
        run_block(plm_spec(), 1000, {Estimator::plm_lasso, Estimator::plm_indirect, Estimator::plm_double});
    in_range(v, b.label + " Double selection mean_bias", metric(b, Estimator::plm_double, "mean_bias"),
             -0.0041 - 0.012, -0.0041 + 0.012);
    in_range(v, b.label + " Double selection std_dev", metric(b, Estimator::plm_double, "std_dev"), 0.111 - 0.015,
             0.111 + 0.015);
    in_range(v, b.label + " Double selection rejection_rate", metric(b, Estimator::plm_double, "rejection_rate"),
             0.03, 0.08);
    in_range(v, b.label + " Lasso rejection_rate", metric(b, Estimator::plm_lasso, "rejection_rate"), 0.98, 1.0);
    in_range(v, b.label + " Indirect Post-Lasso rejection_rate",
             metric(b, Estimator::plm_indirect, "rejection_rate"), 0.0, 0.02);
    return v;
}

Verdict solver_oracle() {
    Verdict v;
    double worst_gap = 0.0;
    double worst_kkt = 0.0;
    int zero_failures = 0;
    int fits = 0;
    for (const SolverMethod method : {SolverMethod::lasso, SolverMethod::sqrt_lasso}) {
        for (std::uint64_t k = 0; k < 100; ++k) {
            Rng rng(SeedSpec{kSeed, 1000 + k});
            const Index n = 10 + static_cast<Index>(rng.below(41));
            const Index p = 1 + static_cast<Index>(rng.below(10));
            Matrix x(n, p);
            for (Index j = 0; j < p; ++j) {
                for (Index i = 0; i < n; ++i) x(i, j) = rng.normal();
                x.col(j) /= std::sqrt(mean_square(x.col(j)));
            }
            Vector beta = Vector::Zero(p);
            for (Index j = 0; j < std::min<Index>(p, 3); ++j) beta[j] = rng.normal();
            const Vector y = x * beta + rng.normal_vector(n);
            const IndexSet unpen = p > 1 && rng.uniform() < 0.3 ? IndexSet{0} : IndexSet{};
            const Vector r0 = unpen.empty() ? y : post_ols(x, y, {}, unpen).residuals;
            const double threshold = method == SolverMethod::lasso
                                         ? lasso_lambda_max(x, y, unpen)
                                         : (x.transpose() * r0).cwiseAbs().maxCoeff() / std::sqrt(mean_square(r0));
            const double lambda = (0.05 + 0.9 * rng.uniform()) * threshold;
            const auto solve = [&](double l) {
                return method == SolverMethod::lasso ? fit_lasso(x, y, l, unpen) : fit_sqrt_lasso(x, y, l, unpen);
            };
            const SparseFit fit = solve(lambda);
            const SparseFit ref = solve_oracle(x, y, lambda, method, unpen);
            const Vector w = penalty_weights(p, unpen);
            worst_gap = std::max(worst_gap, (fit.beta - ref.beta).cwiseAbs().maxCoeff());
            worst_kkt = std::max(worst_kkt, kkt_residual(x, y, fit.beta, lambda, method, w));
            ++fits;
            const SparseFit above = solve(threshold * (1.0 + 1e-9));
            for (Index j = 0; j < p; ++j) {
                if (w[j] > 0.0 && above.beta[j] != 0.0) {
                    ++zero_failures;
                    break;
                }
            }
        }
    }
    v.check(worst_gap <= 1e-5, std::to_string(fits) + " fits: largest coordinate gap to the oracle = " +
                                   sci(worst_gap) + " (<= 1e-5)");
    v.check(worst_kkt <= 1e-8, "largest KKT residual = " + sci(worst_kkt) + " (<= 1e-8)");
    v.check(zero_failures == 0,
            "penalty above the threshold gives an exactly zero penalized part: " + std::to_string(zero_failures) +
                " failures");
    return v;
}

Verdict penalty_properties() {
    Verdict v;
    int bound_violations = 0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const Index n = 50 + 10 * static_cast<Index>(k);
        const Index p = 5 + 20 * static_cast<Index>(k);
        Rng rng(SeedSpec{kSeed, 2000 + k});
        const Matrix x = k % 2 == 0 ? ar_gaussian(rng, n, p, 0.0) : ar_gaussian(rng, n, p, 0.5);
        const Dataset d = normalize(make_dataset(Vector::Zero(n), x));
        const ScoreDraws draws = score_maxima(d.x, SeedSpec{kSeed, 3000 + k}, 2000);
        const double level = upper_empirical_quantile(draws.max_abs, 0.95);
        const double se = quantile_standard_error(draws.max_abs, 0.95);
        const double bound = std::sqrt(static_cast<double>(n)) *
                             normal_quantile(1.0 - 0.05 / (2.0 * static_cast<double>(p)));
        if (level > bound + 2.0 * se) ++bound_violations;
    }
    v.check(bound_violations == 0, "simulated level above the Gaussian bound on " +
                                       std::to_string(bound_violations) + " of 20 designs");

    {
        Rng rng(SeedSpec{kSeed, 4000});
        const Dataset d = normalize(make_dataset(Vector::Zero(100), ar_gaussian(rng, 100, 1, 0.0)));
        const ScoreDraws draws = score_maxima(d.x, SeedSpec{kSeed, 4001}, 20000);
        const double level = upper_empirical_quantile(draws.max_abs, 0.95);
        const double se = quantile_standard_error(draws.max_abs, 0.95);
        const double target = 10.0 * normal_quantile(0.975);
        v.check(std::abs(level - target) <= 2.0 * se, "p = 1 simulated level = " + num(level) + " vs sqrt(n) 1.96 = " +
                                                           num(target) + " (2 MC s.e. = " + num(2.0 * se) + ")");
    }

    int non_monotone = 0;
    PenaltyRule rule;
    rule.kind = PenaltyKind::lasso_x_dependent;
    DgpSpec spec = mean_regression_spec(1.0);
    spec.seed = SeedSpec{kSeed, 0};
    for (Index r = 0; r < 100; ++r) {
        const MeanRegressionDraw draw = gen_mean_regression(spec, r);
        const SigmaResult res = iterated_sigma(normalize(draw.data), rule, SigmaOptions{},
                                               SeedSpec{kSeed, 5000 + static_cast<std::uint64_t>(r)});
        if (!trace_monotone(res.trace)) ++non_monotone;
    }
    v.check(non_monotone == 0, "iterated noise-level trace non-monotone from the second iterate in " +
                                   std::to_string(non_monotone) + " of 100 runs");
    return v;
}

Verdict sup_score_size() {
    Verdict v;
    DgpSpec spec = iv_spec(100, 160.0);
    spec.seed = SeedSpec{kSeed, 0};
    const Index reps = 1000;
    const auto rejected = parallel_map(static_cast<std::size_t>(reps), [&](std::size_t r) {
        const IvDraw draw = gen_iv(spec, static_cast<Index>(r));
        const SupScoreResult res = sup_score(draw.problem, Vector::Constant(1, 1.0), SupScoreOptions{},
                                             SeedSpec{kSeed, 6000 + r});
        return res.statistic[0] > res.critical_finite ? 1 : 0;
    });
    int count = 0;
    for (const int x : rejected) count += x;
    in_range(v, "strong-instrument sup-score rejection of the true coefficient",
             static_cast<double>(count) / static_cast<double>(reps), 0.03, 0.07);

    int mismatches = 0;
    for (std::uint64_t r = 0; r < 10; ++r) {
        const IvDraw draw = gen_iv(r % 2 == 0 ? spec : iv_spec(100, std::nullopt), static_cast<Index>(7000 + r));
        const Vector grid = linear_grid(0.0, 2.0, 101);
        const SupScoreResult res = sup_score(draw.problem, grid, SupScoreOptions{}, SeedSpec{kSeed, 8000 + r});
        IndexSet accepted;
        for (Index g = 0; g < grid.size(); ++g)
            if (res.statistic[g] <= res.critical_finite) accepted.push_back(g);
        if (inverse_lasso_region(draw.problem, grid, SupScoreOptions{}, SeedSpec{kSeed, 8000 + r}) != accepted)
            ++mismatches;
    }
    v.check(mismatches == 0, "inverse-Lasso region differs from the sup-score region in " +
                                 std::to_string(mismatches) + " of 10 draws (101-point grid)");
    return v;
}

Verdict rate_scaling() {
    Verdict v;
    // The gated quantity is the Feasible Lasso error. Post-Lasso refits are
    // printed for reference only: they reach the oracle error by n = 400,
    // so their ratio mixes the rate with the vanishing selection error.
    const std::vector<Estimator> gated{Estimator::sqrt_lasso, Estimator::iterated_lasso};
    const std::vector<Estimator> shown{Estimator::post_sqrt_lasso, Estimator::oracle};
    std::vector<Estimator> est = gated;
    est.insert(est.end(), shown.begin(), shown.end());
    const McBlock small = run_block(mean_regression_spec(1.0, 100), 200, est);
    const McBlock large = run_block(mean_regression_spec(1.0, 400), 200, est);
    const auto ratio_text = [&](Estimator e, double& ratio) {
        const double a = metric(small, e, "median_prediction_error");
        const double b = metric(large, e, "median_prediction_error");
        ratio = a / b;
        return to_string(e) + " median prediction-norm error ratio n=100 / n=400 (" + num(a) + " / " + num(b) + ")";
    };
    for (const Estimator e : gated) {
        double ratio = 0.0;
        const std::string what = ratio_text(e, ratio);
        in_range(v, what, ratio, 1.6, 2.6);
    }
    for (const Estimator e : shown) {
        double ratio = 0.0;
        const std::string what = ratio_text(e, ratio);
        v.lines.push_back("  info  " + what + " = " + num(ratio));
    }
    return v;
}

Verdict determinism() {
    Verdict v;
    StudyOptions opts;
    opts.num_sims = 200;
    const auto with_threads = [](int threads, const std::function<std::string()>& run) {
        set_num_threads(threads);
        std::string out = run();
        set_num_threads(max_threads());
        return out;
    };
    const std::vector<std::pair<std::string, Index>> studies{{"table2", 3}, {"table4", 4}, {"plm", 20}};
    for (const auto& [study, reps] : studies) {
        const auto run = [&, study = study, reps = reps] {
            return to_json(run_named_study(study, reps, kSeed, opts)).dump();
        };
        const std::string one = with_threads(1, run);
        const std::string again = with_threads(1, run);
        const std::string four = with_threads(4, run);
        const std::string eight = with_threads(8, run);
        v.check(one == again && one == four && one == eight,
                study + " (" + std::to_string(reps) + " reps): identical report for 1, 1, 4 and 8 threads");
    }
    DgpSpec spec = iv_spec(100, 160.0);
    spec.reps = 20;
    spec.seed = SeedSpec{kSeed, 0};
    const auto power = [&] { return to_json(iv_power_curve(spec, {0.8, 1.0, 1.2}, opts)).dump(); };
    v.check(with_threads(1, power) == with_threads(8, power), "power curve: identical for 1 and 8 threads");
    return v;
}

struct Criterion {
    int id;
    std::string name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "mean-regression Monte Carlo table", mean_regression_table},
        {2, "IV Monte Carlo table", iv_table},
        {3, "partially linear model Monte Carlo table", plm_table},
        {4, "solver agreement with the slow oracle", solver_oracle},
        {5, "penalty-rule properties", penalty_properties},
        {6, "sup-score finite-sample size and inverse-Lasso region", sup_score_size},
        {7, "estimation-rate scaling in n", rate_scaling},
        {8, "determinism across thread counts", determinism},
    };
    std::vector<int> wanted;
    for (int k = 1; k < argc; ++k) wanted.push_back(std::stoi(argv[k]));

    bool all_pass = true;
    for (const Criterion& c : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        for (const auto& line : v.lines) std::cout << line << "\n";
        std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << "\n" << std::flush;
        all_pass = all_pass && v.pass;
    }
    return all_pass ? 0 : 1;
}
