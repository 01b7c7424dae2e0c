#pragma once

#include <vector>

#include <Eigen/Dense>

namespace sparse_infer {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sorted, duplicate-free list of column indices.
using IndexSet = std::vector<Index>;

/// Sorts and deduplicates in place; returns the argument for chaining.
IndexSet& canonicalize(IndexSet& s);

/// Union of two index sets (canonical output).
IndexSet set_union(const IndexSet& a, const IndexSet& b);

/// Indices in [0, p) that are not in `s`.
IndexSet complement(const IndexSet& s, Index p);

bool contains(const IndexSet& s, Index j);

}  // namespace sparse_infer
