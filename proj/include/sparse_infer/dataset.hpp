#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparse_infer/types.hpp"

namespace sparse_infer {

/// Response vector plus an n x p design whose row i is x_i'.
///
/// Immutable once built; share freely across threads. `col_scales[j]` is
/// the root-mean-square of the original column j, so after normalize()
/// every column satisfies E_n[x_ij^2] = 1 and raw = normalized * scale.
struct Dataset {
    Vector y;
    Matrix x;
    Vector col_scales;
    bool normalized = false;
    std::vector<std::string> names;  // optional column labels, size p or empty
    std::string response_name;
    /// Column holding the all-ones intercept, if one was appended.
    std::optional<Index> intercept;

    [[nodiscard]] Index n() const { return x.rows(); }
    [[nodiscard]] Index p() const { return x.cols(); }

    /// Label of column j, falling back to "x<j+1>".
    [[nodiscard]] std::string name(Index j) const;
};

/// Checks shape and finiteness; throws InputError.
void validate(const Dataset& d);

/// Builds a raw dataset from parts and validates it.
Dataset make_dataset(Vector y, Matrix x, std::vector<std::string> names = {});

/// Header-first numeric CSV held column-wise by name.
struct NumericTable {
    std::vector<std::string> columns;
    Matrix values;  // rows x columns

    /// Position of a named column; throws InputError when absent.
    [[nodiscard]] Index column(const std::string& name) const;
    [[nodiscard]] Vector get(const std::string& name) const;
    [[nodiscard]] Matrix get(const std::vector<std::string>& names) const;
};

/// Reads a comma-separated file with a header row. Quoted fields may hold
/// commas, doubled quotes and line breaks; every cell must be numeric.
NumericTable load_table(const std::filesystem::path& path);

/// Throws InputError naming the first column whose entries are all equal.
void reject_constant_columns(const Matrix& x, const std::vector<std::string>& names);

/// Reads a header-first numeric CSV. Every non-response column becomes a
/// regressor in file order. Constant regressor columns are rejected.
Dataset load_csv(const std::filesystem::path& path, const std::string& response_column);

/// Prepends an all-ones intercept column at index 0 (scale 1).
Dataset with_intercept(const Dataset& d);

/// Rescales every column to unit empirical second moment. Idempotent.
Dataset normalize(const Dataset& d);

/// Maps coefficients fitted on normalize(d) back to the raw column scale.
Vector denormalize_coefficients(const Dataset& normalized, const Vector& beta);

/// E_n[v_i^2].
double mean_square(const Eigen::Ref<const Vector>& v);

}  // namespace sparse_infer
