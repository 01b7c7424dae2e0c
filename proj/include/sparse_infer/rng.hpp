#pragma once

#include <cstdint>
#include <random>

#include "sparse_infer/types.hpp"

namespace sparse_infer {

/// Identifies one independent random stream. Two specs with equal fields
/// produce the same draws, whatever thread or process consumes them.
struct SeedSpec {
    std::uint64_t master_seed = 20130521;
    std::uint64_t stream_id = 0;

    /// Deterministically derived sub-stream, e.g. per replication, per
    /// simulation draw, or per purpose within one replication.
    [[nodiscard]] SeedSpec child(std::uint64_t tag) const;

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// Per-task generator. Never shared across threads.
class Rng {
public:
    explicit Rng(const SeedSpec& spec);

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    Vector normal_vector(Index count);
    void fill_normal(Eigen::Ref<Vector> out);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// `count` i.i.d. N(0,1) draws from the stream named by `spec`.
Vector gaussian_stream(const SeedSpec& spec, Index count);

/// Uniform random permutation of 0..n-1.
std::vector<Index> random_permutation(const SeedSpec& spec, Index n);

}  // namespace sparse_infer
