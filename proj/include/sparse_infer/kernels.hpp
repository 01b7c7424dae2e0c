#pragma once

// Data-parallel hot loops. Every kernel has a plain serial reference path
// (Exec::serial) kept for testing and benchmarking; the OpenMP path
// (Exec::parallel) partitions work into fixed-size blocks that do not depend
// on the thread count, so both paths see identical random draws and the
// parallel result is bit-identical for any number of threads.

#include <cstddef>
#include <exception>
#include <vector>

#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparse_infer {

enum class Exec { serial, parallel };

/// Caps worker threads for subsequent parallel kernels (<= 0 keeps default).
void set_num_threads(int threads);
int max_threads();

/// Draws of the multiplier score maxima. For draw s with g ~ N(0, I_n)
/// taken from seed.child(s):
///   max_abs[s] = max_j |sum_i x_ij g_i|      (= n ||E_n[x g]||_inf)
///   g_rms[s]   = sqrt(E_n[g_i^2])
struct ScoreDraws {
    Vector max_abs;
    Vector g_rms;
};

ScoreDraws score_maxima(const Matrix& x, const SeedSpec& seed, Index num_sims, Exec exec = Exec::parallel);

/// Self-normalized maxima for the sup-score critical value. `w_basis` is an
/// orthonormal basis of the control space (n x k, possibly k = 0); draws are
/// residualized on it before forming
///   max_j |sum_i g~_i x_ij| / sqrt(E_n[g~_i^2 x_ij^2]).
/// Columns whose denominator vanishes are skipped.
Vector sup_score_maxima(const Matrix& x_tilde, const Matrix& w_basis, const SeedSpec& seed, Index num_sims,
                        Exec exec = Exec::parallel);

/// Minimum and maximum eigenvalue over every principal m x m submatrix of
/// `gram` indexed by the given subsets (each of size m).
struct EigenExtremes {
    double min = 0.0;
    double max = 0.0;
};
EigenExtremes subset_eigen_extremes(const Matrix& gram, const std::vector<IndexSet>& subsets,
                                    Exec exec = Exec::parallel);

/// Evaluates fn(i) for i in [0, count) and returns the results in index
/// order. Used for Monte Carlo replications: each task owns its RNG stream.
template <class Fn>
auto parallel_map(std::size_t count, Fn&& fn, Exec exec = Exec::parallel) {
    using Result = decltype(fn(std::size_t{0}));
    std::vector<Result> out(count);
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    // Exceptions must not escape the parallel region; the lowest failing
    // index is rethrown so the error matches the serial path.
    std::vector<std::exception_ptr> errors(count);
    const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = fn(k);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace sparse_infer
