#include "sparse_infer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace sparse_infer {
namespace {

// Draws per parallel block. Fixed so block contents never depend on threads.
constexpr Index kBlock = 64;

Index block_count(Index total) { return (total + kBlock - 1) / kBlock; }

void fill_draws(Matrix& g, const SeedSpec& seed, Index first) {
    for (Index c = 0; c < g.cols(); ++c) {
        Rng rng(seed.child(static_cast<std::uint64_t>(first + c)));
        rng.fill_normal(g.col(c));
    }
}

}  // namespace

void set_num_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

ScoreDraws score_maxima(const Matrix& x, const SeedSpec& seed, Index num_sims, Exec exec) {
    const Index n = x.rows();
    const Index p = x.cols();
    ScoreDraws out{Vector::Zero(num_sims), Vector::Zero(num_sims)};
    if (exec == Exec::serial) {
        for (Index s = 0; s < num_sims; ++s) {
            const Vector g = gaussian_stream(seed.child(static_cast<std::uint64_t>(s)), n);
            double best = 0.0;
            for (Index j = 0; j < p; ++j) {
                double acc = 0.0;
                for (Index i = 0; i < n; ++i) acc += x(i, j) * g[i];
                best = std::max(best, std::abs(acc));
            }
            out.max_abs[s] = best;
            out.g_rms[s] = std::sqrt(g.squaredNorm() / static_cast<double>(n));
        }
        return out;
    }

    const Index blocks = block_count(num_sims);
#pragma omp parallel for schedule(dynamic, 1)
    for (Index b = 0; b < blocks; ++b) {
        const Index first = b * kBlock;
        const Index width = std::min(kBlock, num_sims - first);
        Matrix g(n, width);
        fill_draws(g, seed, first);
        const Matrix scores = x.transpose() * g;
        for (Index c = 0; c < width; ++c) {
            out.max_abs[first + c] = p > 0 ? scores.col(c).cwiseAbs().maxCoeff() : 0.0;
            out.g_rms[first + c] = std::sqrt(g.col(c).squaredNorm() / static_cast<double>(n));
        }
    }
    return out;
}

Vector sup_score_maxima(const Matrix& x_tilde, const Matrix& w_basis, const SeedSpec& seed, Index num_sims,
                        Exec exec) {
    const Index n = x_tilde.rows();
    const Index p = x_tilde.cols();
    Vector out = Vector::Zero(num_sims);
    const double nd = static_cast<double>(n);

    if (exec == Exec::serial) {
        for (Index s = 0; s < num_sims; ++s) {
            Vector g = gaussian_stream(seed.child(static_cast<std::uint64_t>(s)), n);
            if (w_basis.cols() > 0) g -= w_basis * (w_basis.transpose() * g);
            double best = 0.0;
            for (Index j = 0; j < p; ++j) {
                double num = 0.0;
                double den = 0.0;
                for (Index i = 0; i < n; ++i) {
                    num += g[i] * x_tilde(i, j);
                    den += g[i] * g[i] * x_tilde(i, j) * x_tilde(i, j);
                }
                if (den <= 0.0) continue;
                best = std::max(best, std::abs(num) / std::sqrt(den / nd));
            }
            out[s] = best;
        }
        return out;
    }

    const Matrix x_sq = x_tilde.cwiseAbs2();
    const Index blocks = block_count(num_sims);
#pragma omp parallel for schedule(dynamic, 1)
    for (Index b = 0; b < blocks; ++b) {
        const Index first = b * kBlock;
        const Index width = std::min(kBlock, num_sims - first);
        Matrix g(n, width);
        fill_draws(g, seed, first);
        if (w_basis.cols() > 0) g -= w_basis * (w_basis.transpose() * g);
        const Matrix num = x_tilde.transpose() * g;
        const Matrix den = x_sq.transpose() * g.cwiseAbs2();
        for (Index c = 0; c < width; ++c) {
            double best = 0.0;
            for (Index j = 0; j < p; ++j) {
                if (den(j, c) <= 0.0) continue;
                best = std::max(best, std::abs(num(j, c)) / std::sqrt(den(j, c) / nd));
            }
            out[first + c] = best;
        }
    }
    return out;
}

EigenExtremes subset_eigen_extremes(const Matrix& gram, const std::vector<IndexSet>& subsets, Exec exec) {
    const auto count = static_cast<Index>(subsets.size());
    auto extremes_of = [&](const IndexSet& s) {
        const auto m = static_cast<Index>(s.size());
        Matrix sub(m, m);
        for (Index a = 0; a < m; ++a)
            for (Index b = 0; b < m; ++b) sub(a, b) = gram(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
        Eigen::SelfAdjointEigenSolver<Matrix> es(sub, Eigen::EigenvaluesOnly);
        return EigenExtremes{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
    };

    EigenExtremes out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    if (exec == Exec::serial) {
        for (const auto& s : subsets) {
            const auto e = extremes_of(s);
            out.min = std::min(out.min, e.min);
            out.max = std::max(out.max, e.max);
        }
        return out;
    }
    // min/max are order-independent, so a plain reduction stays deterministic.
    double lo = out.min;
    double hi = out.max;
#pragma omp parallel for schedule(static) reduction(min : lo) reduction(max : hi)
    for (Index k = 0; k < count; ++k) {
        const auto e = extremes_of(subsets[static_cast<std::size_t>(k)]);
        lo = std::min(lo, e.min);
        hi = std::max(hi, e.max);
    }
    return EigenExtremes{lo, hi};
}

}  // namespace sparse_infer
