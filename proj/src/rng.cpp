#include "sparse_infer/rng.hpp"

#include <numeric>

namespace sparse_infer {
namespace {

// SplitMix64 finalizer; used only to derive stream keys.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::mt19937_64 make_engine(const SeedSpec& spec) {
    const std::uint64_t a = mix64(spec.master_seed);
    const std::uint64_t b = mix64(spec.stream_id ^ 0x5851f42d4c957f2dULL);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

SeedSpec SeedSpec::child(std::uint64_t tag) const {
    return SeedSpec{master_seed, mix64(mix64(stream_id) ^ (tag + 0x632be59bd9b4e019ULL))};
}

Rng::Rng(const SeedSpec& spec) : engine_(make_engine(spec)) {}

std::uint64_t Rng::below(std::uint64_t bound) {
    std::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
    return dist(engine_);
}

Vector Rng::normal_vector(Index count) {
    Vector v(count);
    fill_normal(v);
    return v;
}

void Rng::fill_normal(Eigen::Ref<Vector> out) {
    for (Index i = 0; i < out.size(); ++i) out[i] = normal_(engine_);
}

Vector gaussian_stream(const SeedSpec& spec, Index count) {
    Rng rng(spec);
    return rng.normal_vector(count);
}

std::vector<Index> random_permutation(const SeedSpec& spec, Index n) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(spec);
    // Fisher-Yates with our own index draws so the result does not depend on
    // the standard library's shuffle implementation.
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

}  // namespace sparse_infer
