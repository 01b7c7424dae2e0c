#include "sparse_infer/cli.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sparse_infer/dataset.hpp"
#include "sparse_infer/errors.hpp"
#include "sparse_infer/feasible.hpp"
#include "sparse_infer/iv.hpp"
#include "sparse_infer/kernels.hpp"
#include "sparse_infer/mc.hpp"
#include "sparse_infer/plm.hpp"
#include "sparse_infer/report.hpp"
#include "sparse_infer/solvers.hpp"

namespace sparse_infer {
namespace {

constexpr std::uint64_t kDefaultSeed = 20130521;

struct Common {
    std::uint64_t seed = kDefaultSeed;
    int threads = 0;
    std::string out_json;
    std::string out_csv;
    std::string format = "text";
};

struct PenaltyFlags {
    std::string penalty = "sqrt";
    double c = 1.1;
    double gamma = 0.05;
    Index sims = 1000;
    Index folds = 5;
    std::optional<double> sigma;
    std::string sigma_variant = "lasso";
};

// What a subcommand hands back for emission.
struct Output {
    Json json;
    std::string csv;
    std::string text;
};

std::string fixed6(double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(6);
    s << v;
    return s.str();
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "master seed of every random stream")->capture_default_str();
    app->add_option("--threads", c.threads, "worker threads; 0 uses all available cores")->capture_default_str();
    app->add_option("--out", c.out_json, "write the JSON report to this path");
    app->add_option("--out-csv", c.out_csv, "write the CSV report to this path");
    app->add_option("--format", c.format, "standard output format")
        ->check(CLI::IsMember({"text", "json", "csv"}))
        ->capture_default_str();
}

void add_penalty(CLI::App* app, PenaltyFlags& f, bool with_sigma, const std::string& default_penalty) {
    f.penalty = default_penalty;
    app->add_option("--penalty", f.penalty, "penalty rule: sqrt, sqrt-asymptotic, lasso, lasso-asymptotic, cv")
        ->check(CLI::IsMember({"sqrt", "sqrt-asymptotic", "lasso", "lasso-asymptotic", "cv"}))
        ->capture_default_str();
    app->add_option("--c", f.c, "penalty constant, > 1")->capture_default_str();
    app->add_option("--gamma", f.gamma, "confidence parameter, in (0,1)")->capture_default_str();
    app->add_option("--sims", f.sims, "simulation draws for X-dependent penalties, >= 100")->capture_default_str();
    app->add_option("--folds", f.folds, "cross-validation folds, >= 2")->capture_default_str();
    app->add_option("--sigma-variant", f.sigma_variant, "noise iteration for Lasso rules: lasso or post")
        ->check(CLI::IsMember({"lasso", "post"}))
        ->capture_default_str();
    if (with_sigma) app->add_option("--sigma", f.sigma, "known noise level for Lasso rules, > 0");
}

void check_range(bool ok, const std::string& message) {
    if (!ok) throw InputError(message);
}

FitRequest make_request(const PenaltyFlags& f) {
    check_range(f.c > 1.0 && std::isfinite(f.c), "c must be > 1");
    check_range(f.gamma > 0.0 && f.gamma < 1.0, "gamma must be in (0,1)");
    check_range(f.sims >= 100, "sims must be >= 100");
    check_range(f.folds >= 2, "folds must be >= 2");
    FitRequest req;
    if (f.penalty == "sqrt") {
        req.rule.kind = PenaltyKind::sqrt_lasso_x_dependent;
    } else if (f.penalty == "sqrt-asymptotic") {
        req.rule.kind = PenaltyKind::sqrt_lasso_x_independent;
    } else if (f.penalty == "lasso") {
        req.rule.kind = PenaltyKind::lasso_x_dependent;
    } else if (f.penalty == "lasso-asymptotic") {
        req.rule.kind = PenaltyKind::lasso_x_independent;
    } else {
        req.rule.kind = PenaltyKind::cross_validation;
    }
    if (f.sigma) {
        if (req.rule.sqrt_criterion())
            throw InputError("--sigma conflicts with the square-root penalty, which does not depend on the noise level");
        if (req.rule.kind == PenaltyKind::cross_validation)
            throw InputError("--sigma has no effect with cross-validation");
        check_range(*f.sigma > 0.0 && std::isfinite(*f.sigma), "sigma must be > 0");
        req.sigma = f.sigma;
    }
    req.rule.c = f.c;
    req.rule.gamma = f.gamma;
    req.rule.num_sims = f.sims;
    req.rule.folds = f.folds;
    req.sigma_opts.variant = f.sigma_variant == "post" ? SigmaVariant::post_lasso : SigmaVariant::lasso;
    return req;
}

std::vector<std::string> names_of(const IndexSet& s, const std::function<std::string(Index)>& name) {
    std::vector<std::string> out;
    for (const Index j : s) out.push_back(name(j));
    return out;
}

std::vector<std::string> other_columns(const NumericTable& t, const std::vector<std::string>& exclude) {
    std::vector<std::string> out;
    for (const auto& c : t.columns) {
        if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// fit / post-fit

struct FitArgs {
    std::string input;
    std::string response;
    bool no_intercept = false;
    PenaltyFlags penalty;
};

Output run_fit(const FitArgs& a, const Common& c, bool post) {
    FitRequest req = make_request(a.penalty);
    req.post = post;
    Dataset d = load_csv(a.input, a.response);
    if (!a.no_intercept) d = with_intercept(d);
    const FeasibleFit fit = fit_feasible(d, req, SeedSpec{c.seed, 0});

    Json payload;
    payload["command"] = post ? "post-fit" : "fit";
    payload["penalty"] = to_string(req.rule.kind);
    payload["post"] = post;
    payload["n"] = d.n();
    payload["p"] = d.p();
    payload["lambda"] = fit.lambda;
    payload["sigma_hat"] = fit.sigma_hat ? Json(*fit.sigma_hat) : Json(nullptr);
    payload["support"] = names_of(fit.selected, [&](Index j) { return d.name(j); });
    Json coefs = Json::object();
    std::vector<std::vector<std::string>> rows;
    std::string csv = "variable,coefficient\n";
    for (Index j = 0; j < d.p(); ++j) {
        const bool show = fit.beta[j] != 0.0 || (d.intercept && *d.intercept == j);
        if (!show) continue;
        const std::string name = d.intercept && *d.intercept == j ? "(intercept)" : d.name(j);
        coefs[name] = fit.beta[j];
        rows.push_back({name, fixed6(fit.beta[j])});
        csv += name + "," + format_double(fit.beta[j]) + "\n";
    }
    payload["coefficients"] = coefs;
    payload["warnings"] = fit.warnings;

    std::ostringstream text;
    text << (post ? "Post-" : "") << "penalized fit of " << a.response << " (" << to_string(req.rule.kind) << ")\n";
    text << "n = " << d.n() << ", p = " << d.p() << ", lambda = " << fixed6(fit.lambda);
    if (fit.sigma_hat) text << ", sigma_hat = " << fixed6(*fit.sigma_hat);
    text << ", selected " << fit.selected.size() << "\n";
    text << render_table({"variable", "coefficient"}, rows);
    for (const auto& w : fit.warnings) text << "warning: " << w << "\n";
    return {tagged("fit", payload), csv, text.str()};
}

// ---------------------------------------------------------------------------
// iv / supscore

struct IvArgs {
    std::string input;
    std::string y1;
    std::string y2;
    std::vector<std::string> instruments;
    std::vector<std::string> controls;
    std::string first_stage = "lasso";
    double fuller_a = 1.0;
    PenaltyFlags penalty;
    std::string grid;
    bool no_simulate = false;
};

IVProblem load_iv(const IvArgs& a) {
    const NumericTable t = load_table(a.input);
    IVProblem prob;
    prob.y1 = t.get(a.y1);
    prob.y2 = t.get(a.y2);
    std::vector<std::string> inst = a.instruments;
    if (inst.empty()) {
        std::vector<std::string> exclude{a.y1, a.y2};
        exclude.insert(exclude.end(), a.controls.begin(), a.controls.end());
        inst = other_columns(t, exclude);
    }
    if (inst.empty()) throw InputError("no instrument columns");
    prob.x = t.get(inst);
    reject_constant_columns(prob.x, inst);
    prob.instrument_names = inst;
    prob.w.resize(t.values.rows(), 1 + static_cast<Index>(a.controls.size()));
    prob.w.col(0).setOnes();
    prob.control_names.push_back("(intercept)");
    for (std::size_t k = 0; k < a.controls.size(); ++k) {
        prob.w.col(1 + static_cast<Index>(k)) = t.get(a.controls[k]);
        prob.control_names.push_back(a.controls[k]);
    }
    prob.validate();
    return prob;
}

Vector parse_grid(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream s(spec);
    std::string item;
    while (std::getline(s, item, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("grid must be lo,hi,count");
        }
    }
    if (parts.size() != 3) throw InputError("grid must be lo,hi,count");
    check_range(parts[0] < parts[1], "grid needs lo < hi");
    check_range(parts[2] >= 2 && parts[2] <= 1e6 && parts[2] == std::floor(parts[2]), "grid count must be an integer in [2, 1e6]");
    return linear_grid(parts[0], parts[1], static_cast<Index>(parts[2]));
}

Json region_json(const Region& r) {
    Json j;
    j["empty"] = r.empty;
    j["lo"] = r.empty ? Json(nullptr) : Json(r.lo);
    j["hi"] = r.empty ? Json(nullptr) : Json(r.hi);
    j["unbounded_below"] = r.unbounded_below;
    j["unbounded_above"] = r.unbounded_above;
    j["accepted_points"] = r.accepted.size();
    return j;
}

std::string region_text(const Region& r) {
    if (r.empty) return "empty on the grid";
    std::string s = "[" + fixed6(r.lo) + ", " + fixed6(r.hi) + "]";
    if (r.unbounded_below || r.unbounded_above) s += " (reaches the grid edge)";
    return s;
}

SupScoreOptions supscore_options(const IvArgs& a, const Common& c) {
    check_range(a.penalty.gamma > 0.0 && a.penalty.gamma < 1.0, "gamma must be in (0,1)");
    check_range(a.penalty.c > 1.0 && std::isfinite(a.penalty.c), "c must be > 1");
    check_range(a.penalty.sims >= 100, "sims must be >= 100");
    (void)c;
    SupScoreOptions so;
    so.gamma = a.penalty.gamma;
    so.c = a.penalty.c;
    so.num_sims = a.penalty.sims;
    so.simulate = !a.no_simulate;
    return so;
}

Output run_supscore(const IvArgs& a, const Common& c) {
    const SupScoreOptions so = supscore_options(a, c);
    const IVProblem prob = load_iv(a);
    const SeedSpec seed{c.seed, 0};
    const Vector grid = a.grid.empty() ? default_sup_score_grid(prob, seed.child(1)) : parse_grid(a.grid);
    const SupScoreResult res = sup_score(prob, grid, so, seed.child(2));

    Json payload;
    payload["command"] = "supscore";
    payload["gamma"] = so.gamma;
    payload["critical_finite"] = std::isfinite(res.critical_finite) ? Json(res.critical_finite) : Json(nullptr);
    payload["critical_asymptotic"] = res.critical_asymptotic;
    payload["region_finite"] = so.simulate ? region_json(res.ci_finite) : Json(nullptr);
    payload["region_asymptotic"] = region_json(res.ci_asymptotic);
    payload["grid"] = std::vector<double>(grid.data(), grid.data() + grid.size());
    payload["statistic"] = std::vector<double>(res.statistic.data(), res.statistic.data() + res.statistic.size());
    payload["warnings"] = res.warnings;

    std::string csv = "a,statistic,accept_finite,accept_asymptotic\n";
    for (Index k = 0; k < grid.size(); ++k) {
        const double st = res.statistic[k];
        csv += format_double(grid[k]) + "," + format_double(st) + "," +
               (so.simulate ? (st <= res.critical_finite ? "1" : "0") : "") + "," +
               (st <= res.critical_asymptotic ? "1" : "0") + "\n";
    }
    std::ostringstream text;
    const double level = 100.0 * (1.0 - so.gamma);
    text << "Sup-score confidence region for the coefficient of " << a.y2 << " (" << grid.size() << " grid points from "
         << format_double(grid[0]) << " to " << format_double(grid[grid.size() - 1]) << ")\n";
    if (so.simulate) {
        text << "  finite-sample " << level << "%: " << region_text(res.ci_finite)
             << "  (critical value " << fixed6(res.critical_finite) << ")\n";
    }
    text << "  asymptotic " << level << "%:    " << region_text(res.ci_asymptotic) << "  (critical value "
         << fixed6(res.critical_asymptotic) << ")\n";
    for (const auto& w : res.warnings) text << "warning: " << w << "\n";
    return {tagged("supscore", payload), csv, text.str()};
}

Output run_iv(const IvArgs& a, const Common& c) {
    check_range(a.fuller_a >= 0.0 && std::isfinite(a.fuller_a), "fuller-a must be >= 0");
    FirstStageOptions fso;
    if (a.first_stage == "cv") {
        PenaltyFlags f = a.penalty;
        f.penalty = "cv";
        fso.request = make_request(f);
    } else {
        PenaltyFlags f = a.penalty;
        f.penalty = "lasso";
        fso.request = make_request(f);
        fso.request.sigma_opts.variant = SigmaVariant::post_lasso;
        fso.start_from_top_instrument = true;
    }
    const IVProblem prob = load_iv(a);
    const SeedSpec seed{c.seed, 0};
    const IVFit tsls = fit_iv_lasso(prob, fso, SecondStage::twosls, seed.child(1));
    const IVFit full = fit_iv_lasso(prob, fso, SecondStage::fuller, seed.child(1), a.fuller_a);
    const auto inst_name = [&](Index j) { return prob.instrument_name(j); };

    EstimateTable table;
    table.title = "IV estimates of the coefficient of " + a.y2 + " in " + a.y1 + " (" +
                  std::to_string(prob.x.cols()) + " candidate instruments, first stage " + a.first_stage + ")";
    table.rows.push_back({"IV-Lasso", tsls.alpha_hat[0], tsls.se_conventional[0],
                          names_of(tsls.selected_instruments, inst_name)});
    table.rows.push_back({"FULL-Lasso", full.alpha_hat[0], full.se_conventional[0],
                          names_of(full.selected_instruments, inst_name)});
    std::vector<std::string> warnings = tsls.warnings;
    Json payload;
    payload["command"] = "iv";
    payload["initially_empty"] = tsls.initially_empty;
    if (tsls.initially_empty) {
        table.notes.emplace_back(
            "no instrument survives the data-driven penalty; the penalty was lowered to force a selection, so the "
            "conventional intervals are unreliable; the sup-score region is reported instead");
        IvArgs sa = a;
        const SupScoreOptions so = supscore_options(sa, c);
        const Vector grid = default_sup_score_grid(prob, seed.child(2));
        const SupScoreResult res = sup_score(prob, grid, so, seed.child(3));
        table.notes.push_back("sup-score " + format_double(100.0 * (1.0 - so.gamma)) +
                              "% region: " + region_text(res.ci_finite));
        payload["sup_score_region"] = region_json(res.ci_finite);
    }
    for (const auto& w : warnings) table.notes.push_back("warning: " + w);
    Json body = to_json(table);
    for (auto it = body.begin(); it != body.end(); ++it) payload[it.key()] = it.value();
    return {tagged("iv", payload), to_csv(table), to_text(table)};
}

// ---------------------------------------------------------------------------
// plm

struct PlmArgs {
    std::string input;
    std::string outcome;
    std::string treatment;
    std::vector<std::string> controls;
    std::vector<std::string> ameliorate;
    std::string strategy = "double";
    PenaltyFlags penalty;
};

Output run_plm(const PlmArgs& a, const Common& c) {
    const FitRequest req = make_request(a.penalty);
    if (req.rule.kind == PenaltyKind::cross_validation) throw InputError("plm needs a plug-in penalty, not cv");
    const NumericTable t = load_table(a.input);
    PlmProblem prob;
    prob.y1 = t.get(a.outcome);
    prob.d = t.get(a.treatment);
    prob.treatment_name = a.treatment;
    prob.control_names = a.controls.empty() ? other_columns(t, {a.outcome, a.treatment}) : a.controls;
    for (const auto& name : prob.control_names) {
        if (name == a.treatment) throw InputError("the treatment cannot also be a control");
    }
    if (prob.control_names.empty()) throw InputError("no control columns");
    prob.x = t.get(prob.control_names);
    reject_constant_columns(prob.x, prob.control_names);
    for (const auto& name : a.ameliorate) {
        const auto it = std::find(prob.control_names.begin(), prob.control_names.end(), name);
        if (it == prob.control_names.end()) throw InputError("amelioration column '" + name + "' is not a control");
        prob.amelioration.push_back(static_cast<Index>(it - prob.control_names.begin()));
    }
    canonicalize(prob.amelioration);
    prob.validate();

    const SeedSpec seed{c.seed, 0};
    std::vector<PlmFit> fits;
    if (a.strategy == "all") {
        const PlmAll all = plm_all(prob, req, seed);
        fits = {all.lasso, all.post_lasso, all.indirect, all.double_selection};
    } else if (a.strategy == "i") {
        fits = {plm_strategy_i(prob, req, seed)};
    } else if (a.strategy == "ii") {
        fits = {plm_strategy_ii(prob, req, seed)};
    } else if (a.strategy == "iii") {
        fits = {plm_strategy_iii(prob, req, seed)};
    } else {
        fits = {plm_double(prob, req, seed)};
    }

    const auto control_name = [&](Index j) { return prob.control_name(j); };
    EstimateTable table;
    table.title = "Effect of " + a.treatment + " on " + a.outcome + " (" + std::to_string(prob.x.cols()) +
                  " controls, " + to_string(req.rule.kind) + " selection)";
    Json details = Json::array();
    for (const PlmFit& f : fits) {
        table.rows.push_back({to_string(f.strategy), f.alpha_hat, f.se, names_of(f.i_union, control_name)});
        for (const auto& w : f.warnings) table.notes.push_back(to_string(f.strategy) + ": " + w);
        details.push_back({{"strategy", to_string(f.strategy)},
                           {"treatment_selection", names_of(f.i1, control_name)},
                           {"outcome_selection", names_of(f.i2, control_name)},
                           {"controls_used", names_of(f.i_union, control_name)},
                           {"sigma_zeta_sq", f.sigma_zeta_hat},
                           {"mean_sq_treatment_residual", f.en_vhat2}});
    }
    Json payload;
    payload["command"] = "plm";
    Json body = to_json(table);
    for (auto it = body.begin(); it != body.end(); ++it) payload[it.key()] = it.value();
    payload["details"] = details;
    return {tagged("plm", payload), to_csv(table), to_text(table)};
}

// ---------------------------------------------------------------------------
// mc

struct McArgs {
    std::string study;
    std::optional<Index> reps;
    Index sims = 1000;
    std::optional<Index> folds;
    std::string fstar = "160";
    Index n = 100;
    Index points = 21;
    double span = 0.5;
};

Output run_mc(const McArgs& a, const Common& c) {
    check_range(a.sims >= 100, "sims must be >= 100");
    check_range(!a.reps || *a.reps >= 1, "reps must be >= 1");
    check_range(!a.folds || *a.folds >= 2, "folds must be >= 2");
    StudyOptions opts;
    opts.num_sims = a.sims;
    if (a.folds) {
        opts.mean_cv_folds = *a.folds;
        opts.iv_cv_folds = *a.folds;
    }
    if (a.study == "power") {
        check_range(a.points >= 2 && a.points <= 10001, "points must be in [2, 10001]");
        check_range(a.span > 0.0 && std::isfinite(a.span), "span must be > 0");
        check_range(a.n >= 10, "n must be >= 10");
        std::optional<double> fstar;
        if (a.fstar != "none") {
            try {
                fstar = std::stod(a.fstar);
            } catch (const std::exception&) {
                throw InputError("fstar must be a positive number or none");
            }
            check_range(*fstar > 0.0, "fstar must be a positive number or none");
        }
        DgpSpec spec = iv_spec(a.n, fstar);
        spec.reps = a.reps.value_or(200);
        spec.seed = SeedSpec{c.seed, 0};
        std::vector<double> alts;
        for (Index k = 0; k < a.points; ++k)
            alts.push_back(1.0 - a.span + 2.0 * a.span * static_cast<double>(k) / static_cast<double>(a.points - 1));
        const PowerCurve curve = iv_power_curve(spec, alts, opts);
        Json j = to_json(curve);
        j["spec"] = to_json(spec);
        const std::string csv = to_csv(curve);
        std::vector<std::vector<std::string>> rows;
        for (std::size_t k = 0; k < alts.size(); ++k)
            rows.push_back({format_double(alts[k]), format_double(curve.iv_lasso[k]), format_double(curve.sup_score[k])});
        return {j, csv, "Rejection frequency of H0: alpha = a\n" + render_table({"a", "IV-Lasso", "Sup-Score"}, rows)};
    }
    Index reps = 1000;
    if (a.study == "table4") reps = 500;
    const McReport report = run_named_study(a.study, a.reps.value_or(reps), c.seed, opts);
    return {to_json(report), to_csv(report), to_text(report)};
}

// ---------------------------------------------------------------------------
// eig-diag

struct EigArgs {
    std::string input;
    std::string response;
    Index m = 2;
    std::string mode = "auto";
    Index draws = 10000;
};

Output run_eig(const EigArgs& a, const Common& c) {
    check_range(a.m >= 1, "m must be >= 1");
    check_range(a.draws >= 1, "draws must be >= 1");
    const NumericTable t = load_table(a.input);
    const std::vector<std::string> cols = a.response.empty() ? t.columns : other_columns(t, {a.response});
    if (!a.response.empty()) (void)t.column(a.response);
    if (cols.empty()) throw InputError("no design columns");
    Matrix x = t.get(cols);
    reject_constant_columns(x, cols);
    const Index n = x.rows();
    const Dataset d = normalize(make_dataset(Vector::Zero(n), std::move(x), cols));
    EigenMode mode = a.mode == "exact" ? EigenMode::exact : EigenMode::sampled;
    if (a.mode == "auto") {
        double comb = 1.0;
        for (Index k = 0; k < a.m; ++k) comb = comb * static_cast<double>(d.p() - k) / static_cast<double>(k + 1);
        mode = comb <= 1e6 ? EigenMode::exact : EigenMode::sampled;
    }
    const SparseEigenvalues ev = sparse_eigenvalues(d, a.m, mode, a.draws, SeedSpec{c.seed, 0});
    Json payload;
    payload["command"] = "eig-diag";
    payload["m"] = a.m;
    payload["p"] = d.p();
    payload["exact"] = ev.exact;
    payload["min"] = ev.min;
    payload["max"] = ev.max;
    payload["subsets_evaluated"] = ev.subsets_evaluated;
    std::ostringstream text;
    text << a.m << "-sparse eigenvalues of the normalized Gram matrix (" << d.p() << " columns, "
         << (ev.exact ? "exact over " : "sampled over ") << ev.subsets_evaluated << " supports)\n";
    text << "  min " << fixed6(ev.min) << (ev.exact ? "" : " (upper bound)") << "\n";
    text << "  max " << fixed6(ev.max) << (ev.exact ? "" : " (lower bound)") << "\n";
    const std::string csv = "m,min,max,exact,subsets\n" + std::to_string(a.m) + "," + format_double(ev.min) + "," +
                            format_double(ev.max) + "," + (ev.exact ? "1" : "0") + "," +
                            std::to_string(ev.subsets_evaluated) + "\n";
    return {tagged("eig-diag", payload), csv, text.str()};
}

void emit(const Output& o, const Common& c, std::ostream& out) {
    const std::string json = o.json.dump(2) + "\n";
    if (!c.out_json.empty()) write_text_file(c.out_json, json);
    if (!c.out_csv.empty()) write_text_file(c.out_csv, o.csv);
    if (c.format == "json") {
        out << json;
    } else if (c.format == "csv") {
        out << o.csv;
    } else {
        out << o.text;
    }
}

void add_iv_columns(CLI::App* app, IvArgs& a) {
    app->add_option("--input", a.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
    app->add_option("--y1", a.y1, "outcome column")->required();
    app->add_option("--y2", a.y2, "endogenous regressor column")->required();
    app->add_option("--instruments", a.instruments, "instrument columns (default: all other columns)")
        ->delimiter(',');
    app->add_option("--controls", a.controls, "exogenous control columns; an intercept is always included")
        ->delimiter(',');
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse high-dimensional estimation and inference"};
    app.name("sparse-infer");
    app.set_config("--config", "", "TOML-style file setting any flag; command-line values win");
    app.require_subcommand(1);

    Common common;
    FitArgs fit_args;
    FitArgs post_args;
    IvArgs iv_args;
    IvArgs ss_args;
    PlmArgs plm_args;
    McArgs mc_args;
    EigArgs eig_args;

    for (auto [name, target] : {std::pair{"fit", &fit_args}, std::pair{"post-fit", &post_args}}) {
        CLI::App* sub = app.add_subcommand(name, std::string(name) == "fit" ? "penalized regression"
                                                                          : "penalized selection plus least-squares refit");
        sub->add_option("--input", target->input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
        sub->add_option("--response", target->response, "response column")->required();
        sub->add_flag("--no-intercept", target->no_intercept, "do not add an unpenalized intercept");
        add_penalty(sub, target->penalty, true, "sqrt");
        add_common(sub, common);
    }

    CLI::App* iv = app.add_subcommand("iv", "IV with Lasso-selected instruments (2SLS and Fuller)");
    add_iv_columns(iv, iv_args);
    iv->add_option("--first-stage", iv_args.first_stage, "first-stage penalty: lasso (iterated plug-in) or cv")
        ->check(CLI::IsMember({"lasso", "cv"}))
        ->capture_default_str();
    iv->add_option("--fuller-a", iv_args.fuller_a, "Fuller constant, >= 0 (0 gives LIML)")->capture_default_str();
    iv->add_option("--c", iv_args.penalty.c, "penalty constant, > 1")->capture_default_str();
    iv->add_option("--gamma", iv_args.penalty.gamma, "confidence parameter, in (0,1)")->capture_default_str();
    iv->add_option("--sims", iv_args.penalty.sims, "simulation draws, >= 100")->capture_default_str();
    iv->add_option("--folds", iv_args.penalty.folds, "cross-validation folds, >= 2")->capture_default_str();
    add_common(iv, common);

    CLI::App* ss = app.add_subcommand("supscore", "sup-score confidence region, robust to weak identification");
    add_iv_columns(ss, ss_args);
    ss->add_option("--gamma", ss_args.penalty.gamma, "test level, in (0,1)")->capture_default_str();
    ss->add_option("--c", ss_args.penalty.c, "constant of the asymptotic critical value, > 1")->capture_default_str();
    ss->add_option("--sims", ss_args.penalty.sims, "draws for the finite-sample critical value, >= 100")
        ->capture_default_str();
    ss->add_option("--grid", ss_args.grid, "lo,hi,count (default: 2SLS estimate +/- 10 standard errors)");
    ss->add_flag("--no-simulate", ss_args.no_simulate, "skip the simulated critical value");
    add_common(ss, common);

    CLI::App* plm = app.add_subcommand("plm", "treatment effect after selecting controls");
    plm->add_option("--input", plm_args.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
    plm->add_option("--outcome", plm_args.outcome, "outcome column")->required();
    plm->add_option("--treatment", plm_args.treatment, "treatment column")->required();
    plm->add_option("--controls", plm_args.controls, "control columns (default: all other columns)")->delimiter(',');
    plm->add_option("--ameliorate", plm_args.ameliorate, "controls always kept by double selection")->delimiter(',');
    plm->add_option("--strategy", plm_args.strategy, "i, ii, iii, double or all")
        ->check(CLI::IsMember({"i", "ii", "iii", "double", "all"}))
        ->capture_default_str();
    add_penalty(plm, plm_args.penalty, false, "sqrt");
    add_common(plm, common);

    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo studies");
    mc->add_option("--study", mc_args.study, "table2, table4, plm or power")
        ->required()
        ->check(CLI::IsMember({"table2", "table4", "plm", "power"}));
    mc->add_option("--reps", mc_args.reps, "replications (default 1000; 500 for table4; 200 for power)");
    mc->add_option("--sims", mc_args.sims, "draws per simulated penalty, >= 100")->capture_default_str();
    mc->add_option("--folds", mc_args.folds, "cross-validation folds (default 5 for table2, 10 for table4)");
    mc->add_option("--fstar", mc_args.fstar, "power study: instrument strength or none")->capture_default_str();
    mc->add_option("--n", mc_args.n, "power study: sample size")->capture_default_str();
    mc->add_option("--points", mc_args.points, "power study: alternatives on the grid")->capture_default_str();
    mc->add_option("--span", mc_args.span, "power study: alternatives cover 1 +/- span")->capture_default_str();
    add_common(mc, common);

    CLI::App* eig = app.add_subcommand("eig-diag", "sparse eigenvalues of the design Gram matrix");
    eig->add_option("--input", eig_args.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
    eig->add_option("--response", eig_args.response, "column to leave out of the design");
    eig->add_option("--m", eig_args.m, "sparsity level")->capture_default_str();
    eig->add_option("--mode", eig_args.mode, "exact, sampled or auto")
        ->check(CLI::IsMember({"exact", "sampled", "auto"}))
        ->capture_default_str();
    eig->add_option("--draws", eig_args.draws, "random supports in sampled mode")->capture_default_str();
    add_common(eig, common);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        check_range(common.threads >= 0, "threads must be >= 0");
        if (common.threads > 0) set_num_threads(common.threads);
        Output o;
        if (app.got_subcommand("fit")) {
            o = run_fit(fit_args, common, false);
        } else if (app.got_subcommand("post-fit")) {
            o = run_fit(post_args, common, true);
        } else if (app.got_subcommand("iv")) {
            o = run_iv(iv_args, common);
        } else if (app.got_subcommand("supscore")) {
            o = run_supscore(ss_args, common);
        } else if (app.got_subcommand("plm")) {
            o = run_plm(plm_args, common);
        } else if (app.got_subcommand("mc")) {
            o = run_mc(mc_args, common);
        } else {
            o = run_eig(eig_args, common);
        }
        emit(o, common, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace sparse_infer
