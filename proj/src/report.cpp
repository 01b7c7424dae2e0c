#include "sparse_infer/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/penalty.hpp"

namespace sparse_infer {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> number_or_empty(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

DgpKind kind_from_string(const std::string& s) {
    for (const DgpKind k : {DgpKind::mean_regression, DgpKind::iv_exponential, DgpKind::iv_nosignal, DgpKind::plm}) {
        if (to_string(k) == s) return k;
    }
    throw InputError("unknown design kind '" + s + "'");
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k > 0) out.push_back(',');
        out += csv_field(fields[k]);
    }
    out.push_back('\n');
    return out;
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

std::string interval(double est, double se, double level) {
    const double z = normal_quantile(0.5 + level / 2.0);
    return "[" + fixed(est - z * se, 4) + ", " + fixed(est + z * se, 4) + "]";
}

std::string joined(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k > 0 ? sep : "") + v[k];
    return out;
}

// Metric names in first-seen order across all rows of the report.
std::vector<std::string> metric_names(const McReport& report) {
    std::vector<std::string> names;
    for (const McBlock& b : report.blocks)
        for (const McRow& r : b.rows)
            for (const Metric& m : r.metrics)
                if (std::find(names.begin(), names.end(), m.name) == names.end()) names.push_back(m.name);
    return names;
}

}  // namespace

Json tagged(const std::string& kind, Json payload) {
    Json out;
    out["schema"] = kReportSchema;
    out["kind"] = kind;
    for (auto it = payload.begin(); it != payload.end(); ++it) out[it.key()] = it.value();
    return out;
}

std::string format_double(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            const std::string pad(width[c] - cell.size(), ' ');
            if (c > 0) out += "  ";
            out += c == 0 ? cell + pad : pad + cell;
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + "\n";
    };
    std::string out = line(header);
    std::size_t total = 0;
    for (const std::size_t w : width) total += w;
    out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
    for (const auto& r : rows) out += line(r);
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << contents;
    if (!out) throw InputError("write failed: " + path.string());
}

Json to_json(const DgpSpec& spec) {
    Json j;
    j["kind"] = to_string(spec.kind);
    j["n"] = spec.n;
    j["p"] = spec.p;
    j["rho"] = spec.rho;
    j["sigma"] = spec.sigma;
    j["f_star"] = optional_number(spec.f_star);
    j["corr_zeta_v"] = spec.corr_zeta_v;
    j["reps"] = spec.reps;
    j["seed"] = {{"master_seed", spec.seed.master_seed}, {"stream_id", spec.seed.stream_id}};
    return j;
}

DgpSpec dgp_spec_from_json(const Json& j) {
    DgpSpec s;
    s.kind = kind_from_string(j.at("kind").get<std::string>());
    s.n = j.at("n").get<Index>();
    s.p = j.at("p").get<Index>();
    s.rho = j.at("rho").get<double>();
    s.sigma = j.at("sigma").get<double>();
    s.f_star = number_or_empty(j.at("f_star"));
    s.corr_zeta_v = j.at("corr_zeta_v").get<double>();
    s.reps = j.at("reps").get<Index>();
    s.seed.master_seed = j.at("seed").at("master_seed").get<std::uint64_t>();
    s.seed.stream_id = j.at("seed").at("stream_id").get<std::uint64_t>();
    return s;
}

Json to_json(const McReport& report) {
    Json payload;
    payload["study"] = report.study;
    payload["seed"] = report.seed;
    payload["reps"] = report.reps;
    payload["notes"] = report.notes;
    Json blocks = Json::array();
    for (const McBlock& b : report.blocks) {
        Json jb;
        jb["label"] = b.label;
        jb["spec"] = to_json(b.spec);
        Json rows = Json::array();
        for (const McRow& r : b.rows) {
            Json metrics = Json::object();
            for (const Metric& m : r.metrics)
                metrics[m.name] = {{"value", optional_number(m.value)}, {"mc_se", optional_number(m.mc_se)}};
            rows.push_back({{"estimator", r.estimator}, {"metrics", metrics}});
        }
        jb["rows"] = rows;
        blocks.push_back(jb);
    }
    payload["blocks"] = blocks;
    return tagged("mc", payload);
}

McReport mc_report_from_json(const Json& j) {
    if (!j.contains("schema") || j.at("schema") != kReportSchema)
        throw InputError(std::string("report schema is not ") + kReportSchema);
    if (j.at("kind") != "mc") throw InputError("not a Monte Carlo report");
    McReport r;
    r.study = j.at("study").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.reps = j.at("reps").get<Index>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    for (const Json& jb : j.at("blocks")) {
        McBlock b;
        b.label = jb.at("label").get<std::string>();
        b.spec = dgp_spec_from_json(jb.at("spec"));
        for (const Json& jr : jb.at("rows")) {
            McRow row;
            row.estimator = jr.at("estimator").get<std::string>();
            for (auto it = jr.at("metrics").begin(); it != jr.at("metrics").end(); ++it) {
                row.metrics.push_back(
                    {it.key(), number_or_empty(it.value().at("value")), number_or_empty(it.value().at("mc_se"))});
            }
            b.rows.push_back(std::move(row));
        }
        r.blocks.push_back(std::move(b));
    }
    return r;
}

std::string to_csv(const McReport& report) {
    const std::vector<std::string> names = metric_names(report);
    std::vector<std::string> header{"block", "estimator"};
    for (const auto& n : names) {
        header.push_back(n);
        header.push_back(n + "_mc_se");
    }
    std::string out = csv_line(header);
    for (const McBlock& b : report.blocks) {
        for (const McRow& r : b.rows) {
            std::vector<std::string> line{b.label, r.estimator};
            for (const auto& n : names) {
                const Metric* m = r.find(n);
                line.push_back(m && m->value ? format_double(*m->value) : "");
                line.push_back(m && m->mc_se ? format_double(*m->mc_se) : "");
            }
            out += csv_line(line);
        }
    }
    return out;
}

std::string to_text(const McReport& report) {
    std::ostringstream s;
    s << "study " << report.study << ", " << report.reps << " replications, seed " << report.seed << "\n";
    for (const McBlock& b : report.blocks) {
        std::vector<std::string> names;
        for (const McRow& r : b.rows)
            for (const Metric& m : r.metrics)
                if (std::find(names.begin(), names.end(), m.name) == names.end()) names.push_back(m.name);
        std::vector<std::string> header{"estimator"};
        header.insert(header.end(), names.begin(), names.end());
        std::vector<std::vector<std::string>> rows;
        for (const McRow& r : b.rows) {
            std::vector<std::string> line{r.estimator};
            for (const auto& n : names) {
                const Metric* m = r.find(n);
                line.push_back(m && m->value ? fixed(*m->value, 4) : "");
            }
            rows.push_back(line);
        }
        s << "\n[" << b.label << "]\n" << render_table(header, rows);
    }
    for (const auto& note : report.notes) s << "note: " << note << "\n";
    return s.str();
}

Json to_json(const PowerCurve& curve) {
    Json payload;
    payload["alternatives"] = curve.alternatives;
    payload["iv_lasso"] = curve.iv_lasso;
    payload["sup_score"] = curve.sup_score;
    return tagged("power_curve", payload);
}

std::string to_csv(const PowerCurve& curve) {
    std::string out = csv_line({"a", "iv_lasso", "sup_score"});
    for (std::size_t k = 0; k < curve.alternatives.size(); ++k) {
        out += csv_line({format_double(curve.alternatives[k]), format_double(curve.iv_lasso[k]),
                         format_double(curve.sup_score[k])});
    }
    return out;
}

std::string to_text(const EstimateTable& table) {
    std::vector<std::vector<std::string>> rows;
    for (const EstimateRow& r : table.rows) {
        rows.push_back({r.label, fixed(r.estimate, 4), r.se ? fixed(*r.se, 4) : "",
                        r.se ? interval(r.estimate, *r.se, 0.90) : "", r.se ? interval(r.estimate, *r.se, 0.95) : "",
                        joined(r.selected, " ")});
    }
    std::string out = table.title.empty() ? "" : table.title + "\n";
    out += render_table({"estimator", "estimate", "SE", "90% CI", "95% CI", "selected"}, rows);
    for (const auto& note : table.notes) out += "note: " + note + "\n";
    return out;
}

std::string to_csv(const EstimateTable& table) {
    std::string out = csv_line({"estimator", "estimate", "se", "ci90_lo", "ci90_hi", "ci95_lo", "ci95_hi", "selected"});
    for (const EstimateRow& r : table.rows) {
        std::vector<std::string> line{r.label, format_double(r.estimate)};
        if (r.se) {
            line.push_back(format_double(*r.se));
            for (const double level : {0.90, 0.95}) {
                const double z = normal_quantile(0.5 + level / 2.0);
                line.push_back(format_double(r.estimate - z * *r.se));
                line.push_back(format_double(r.estimate + z * *r.se));
            }
        } else {
            line.insert(line.end(), 5, "");
        }
        line.push_back(joined(r.selected, " "));
        out += csv_line(line);
    }
    return out;
}

Json to_json(const EstimateTable& table) {
    Json rows = Json::array();
    for (const EstimateRow& r : table.rows) {
        Json jr;
        jr["estimator"] = r.label;
        jr["estimate"] = r.estimate;
        jr["se"] = optional_number(r.se);
        if (r.se) {
            for (const double level : {0.90, 0.95}) {
                const double z = normal_quantile(0.5 + level / 2.0);
                jr[level < 0.925 ? "ci90" : "ci95"] = {r.estimate - z * *r.se, r.estimate + z * *r.se};
            }
        }
        jr["selected"] = r.selected;
        rows.push_back(jr);
    }
    Json payload;
    payload["title"] = table.title;
    payload["rows"] = rows;
    payload["notes"] = table.notes;
    return payload;
}

}  // namespace sparse_infer
