#include <algorithm>
#include <cmath>

#include "sparse_infer/errors.hpp"
#include "sparse_infer/solvers.hpp"

namespace sparse_infer {
namespace {

constexpr double kExactBudget = 1e6;
constexpr std::size_t kChunk = 1 << 16;

double binomial(Index p, Index m) {
    double c = 1.0;
    for (Index k = 1; k <= m; ++k) c = c * static_cast<double>(p - m + k) / static_cast<double>(k);
    return c;
}

// Advances `s` to the next m-combination of [0, p) in lexicographic order.
bool next_combination(IndexSet& s, Index p) {
    const auto m = static_cast<Index>(s.size());
    Index i = m - 1;
    while (i >= 0 && s[static_cast<std::size_t>(i)] == p - m + i) --i;
    if (i < 0) return false;
    ++s[static_cast<std::size_t>(i)];
    for (Index k = i + 1; k < m; ++k) s[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k - 1)] + 1;
    return true;
}

// Floyd's algorithm: uniform m-subset of [0, p).
IndexSet random_subset(Rng& rng, Index p, Index m) {
    IndexSet s;
    for (Index j = p - m; j < p; ++j) {
        const auto t = static_cast<Index>(rng.below(static_cast<std::uint64_t>(j + 1)));
        if (contains(s, t)) {
            s.push_back(j);
        } else {
            s.push_back(t);
        }
    }
    return canonicalize(s);
}

}  // namespace

SparseEigenvalues sparse_eigenvalues(const Dataset& d, Index m, EigenMode mode, Index draws, const SeedSpec& seed,
                                     Exec exec) {
    const Index p = d.p();
    if (m < 1) throw InputError("sparsity level m must be >= 1");
    if (m > p) throw InputError("sparsity level m exceeds p");
    const Matrix gram = d.x.transpose() * d.x / static_cast<double>(d.n());

    SparseEigenvalues out;
    out.min = std::numeric_limits<double>::infinity();
    out.max = -std::numeric_limits<double>::infinity();
    std::vector<IndexSet> batch;
    auto flush = [&] {
        if (batch.empty()) return;
        const auto e = subset_eigen_extremes(gram, batch, exec);
        out.min = std::min(out.min, e.min);
        out.max = std::max(out.max, e.max);
        out.subsets_evaluated += static_cast<Index>(batch.size());
        batch.clear();
    };

    if (mode == EigenMode::exact) {
        if (binomial(p, m) > kExactBudget)
            throw InputError("exact sparse eigenvalues need C(p, m) <= 1e6; use sampled mode");
        IndexSet s(static_cast<std::size_t>(m));
        for (Index k = 0; k < m; ++k) s[static_cast<std::size_t>(k)] = k;
        do {
            batch.push_back(s);
            if (batch.size() == kChunk) flush();
        } while (next_combination(s, p));
        flush();
        out.exact = true;
        return out;
    }

    if (draws < 1) throw InputError("sampled mode needs at least one draw");
    Rng rng(seed);
    for (Index k = 0; k < draws; ++k) {
        batch.push_back(random_subset(rng, p, m));
        if (batch.size() == kChunk) flush();
    }
    flush();
    out.exact = false;
    return out;
}

}  // namespace sparse_infer
