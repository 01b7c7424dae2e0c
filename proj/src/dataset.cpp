#include "sparse_infer/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sparse_infer/errors.hpp"

namespace sparse_infer {
namespace {

// Splits one logical CSV record. Handles quoted fields with embedded commas,
// doubled quotes and line breaks; `in` supplies continuation lines.
std::vector<std::string> split_record(std::string line, std::istream& in, std::size_t& line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i == line.size()) {
            if (quoted) {
                std::string next;
                if (!std::getline(in, next)) throw InputError("unterminated quoted field");
                ++line_no;
                cur.push_back('\n');
                line = std::move(next);
                i = 0;
                continue;
            }
            break;
        }
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
        ++i;
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

}  // namespace

std::string Dataset::name(Index j) const {
    if (j >= 0 && static_cast<std::size_t>(j) < names.size()) return names[static_cast<std::size_t>(j)];
    return "x" + std::to_string(j + 1);
}

double mean_square(const Eigen::Ref<const Vector>& v) {
    return v.size() == 0 ? 0.0 : v.squaredNorm() / static_cast<double>(v.size());
}

void validate(const Dataset& d) {
    if (d.y.size() != d.x.rows()) throw InputError("response length does not match design rows");
    if (d.n() < 2) throw InputError("need at least 2 observations");
    if (d.p() < 1) throw InputError("need at least 1 regressor");
    if (d.col_scales.size() != d.p()) throw InputError("col_scales length does not match p");
    if (!d.y.allFinite() || !d.x.allFinite()) throw InputError("non-finite entry in dataset");
    if (!d.names.empty() && static_cast<Index>(d.names.size()) != d.p())
        throw InputError("column name count does not match p");
}

Dataset make_dataset(Vector y, Matrix x, std::vector<std::string> names) {
    Dataset d;
    d.y = std::move(y);
    d.x = std::move(x);
    d.col_scales = Vector::Ones(d.x.cols());
    d.names = std::move(names);
    validate(d);
    return d;
}

Index NumericTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == name) return static_cast<Index>(c);
    }
    throw InputError("column '" + name + "' not found");
}

Vector NumericTable::get(const std::string& name) const { return values.col(column(name)); }

Matrix NumericTable::get(const std::vector<std::string>& names) const {
    Matrix out(values.rows(), static_cast<Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) out.col(static_cast<Index>(k)) = get(names[k]);
    return out;
}

NumericTable load_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path.string());

    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw InputError("empty file (header row required): " + path.string());
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    NumericTable table;
    table.columns = split_record(line, in, line_no);
    for (auto& h : table.columns) h = trim(h);
    for (std::size_t a = 0; a < table.columns.size(); ++a) {
        for (std::size_t b = a + 1; b < table.columns.size(); ++b) {
            if (table.columns[a] == table.columns[b])
                throw InputError("duplicate column name '" + table.columns[a] + "'");
        }
    }

    std::vector<std::vector<double>> rows;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++data_row;
        auto fields = split_record(line, in, line_no);
        if (fields.size() != table.columns.size()) {
            std::ostringstream msg;
            msg << "row " << data_row << ": expected " << table.columns.size() << " fields, got " << fields.size();
            throw InputError(msg.str());
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_double(fields[c], values[c])) {
                std::ostringstream msg;
                msg << "non-numeric cell at row " << data_row << ", column '" << table.columns[c] << "': \""
                    << fields[c] << "\"";
                throw InputError(msg.str());
            }
        }
        rows.push_back(std::move(values));
    }

    table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < rows[i].size(); ++c)
            table.values(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
    }
    return table;
}

void reject_constant_columns(const Matrix& x, const std::vector<std::string>& names) {
    for (Index j = 0; j < x.cols(); ++j) {
        const auto col = x.col(j);
        if (x.rows() > 0 && (col.array() == col[0]).all()) {
            const std::string name =
                static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : "x" + std::to_string(j + 1);
            throw InputError("zero-variance column '" + name + "'");
        }
    }
}

Dataset load_csv(const std::filesystem::path& path, const std::string& response_column) {
    const NumericTable table = load_table(path);
    if (std::find(table.columns.begin(), table.columns.end(), response_column) == table.columns.end())
        throw InputError("response column '" + response_column + "' not found");
    const Index response = table.column(response_column);
    std::vector<std::string> regressors;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (static_cast<Index>(c) != response) regressors.push_back(table.columns[c]);
    }
    if (regressors.empty()) throw InputError("no regressor columns");
    Dataset d;
    d.y = table.values.col(response);
    d.x = table.get(regressors);
    d.names = regressors;
    d.response_name = response_column;
    d.col_scales = Vector::Ones(d.x.cols());
    validate(d);
    reject_constant_columns(d.x, d.names);
    return d;
}

Dataset with_intercept(const Dataset& d) {
    Dataset out;
    out.y = d.y;
    out.x.resize(d.n(), d.p() + 1);
    out.x.col(0).setOnes();
    out.x.rightCols(d.p()) = d.x;
    out.col_scales.resize(d.p() + 1);
    out.col_scales[0] = 1.0;
    out.col_scales.tail(d.p()) = d.col_scales;
    out.normalized = d.normalized;
    out.response_name = d.response_name;
    out.names.reserve(static_cast<std::size_t>(d.p() + 1));
    out.names.emplace_back("(Intercept)");
    for (Index j = 0; j < d.p(); ++j) out.names.push_back(d.name(j));
    out.intercept = 0;
    return out;
}

Dataset normalize(const Dataset& d) {
    validate(d);
    if (d.normalized) return d;
    Dataset out = d;
    const double n = static_cast<double>(d.n());
    for (Index j = 0; j < d.p(); ++j) {
        const double rms = std::sqrt(d.x.col(j).squaredNorm() / n);
        if (!(rms > 0.0)) throw InputError("zero-variance column '" + d.name(j) + "'");
        if (rms != 1.0) out.x.col(j) /= rms;
        out.col_scales[j] = d.col_scales[j] * rms;
    }
    out.normalized = true;
    return out;
}

Vector denormalize_coefficients(const Dataset& normalized, const Vector& beta) {
    return beta.array() / normalized.col_scales.array();
}

}  // namespace sparse_infer
